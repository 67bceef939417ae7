"""Command line interface.

Subcommands: simulate, reconstruct, montecarlo, fss-fit, compare,
export-plotdata. Exit codes: 0 success, 2 input error, 3 convergence
failure, 4 Nyquist/physics validation failure.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import io
from .analysis import MethodSummary, TimeBinSeries, compare_methods, fss_fit
from .errors import ConvergenceError, FTQSTError, ScanFormatError
from .forward import (
    INTENSITY_PRESET,
    SourceModel,
    apply_virtual_waveplate,
    default_waveplates,
    poisson_counts,
    simulate_scan,
)
from .harmonics import evaluate_series
from .qmat import concurrence, fidelity_to_pure, named_state
from .reconstruct import (
    MleConfig,
    ProjectiveData,
    ReconstructionResult,
    fit_signal,
    projective_operators,
    reconstruct,
    simulate_projective,
    spectrum_of,
)
from .uncertainty import DEFAULT_SAMPLES, monte_carlo

log = logging.getLogger("ftqst")

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_PHYSICS = 0, 2, 3, 4


@dataclass
class RunConfig:
    """All tunables of a run; ``--config`` JSON keys override the flags."""

    seed: int | None = None
    intensity: float | None = None
    n_points: int | None = None
    multipliers: list | None = None
    method: str = "mle"
    target: str | None = None
    samples: int = DEFAULT_SAMPLES
    max_iter: int = 2000
    tol: float = 1e-10
    correction: list | None = None
    source: dict = field(default_factory=dict)
    jobs: int = 1

    def validate(self, n_qubits=None):
        if self.intensity is not None and not self.intensity >= 0:
            raise ValueError(f"intensity must be non-negative, got {self.intensity}")
        if self.n_points is not None and self.n_points < 1:
            raise ValueError("n_points must be positive")
        if self.method not in ("linear", "mle"):
            raise ValueError(f"method must be 'linear' or 'mle', got {self.method!r}")
        if self.samples < 2:
            raise ValueError(f"Monte Carlo needs at least 2 samples, got {self.samples}")
        if self.correction is not None and len(self.correction) % 2:
            raise ValueError("correction takes (theta, phi) pairs")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if self.target is not None:
            named_state(self.target)
        MleConfig(max_iter=self.max_iter, tol=self.tol)
        if n_qubits is not None and self.multipliers is not None and len(self.multipliers) != n_qubits:
            raise ValueError(f"{len(self.multipliers)} multipliers given for {n_qubits} qubits")
        return self

    @property
    def mle(self):
        return MleConfig(max_iter=self.max_iter, tol=self.tol)

    @property
    def correction_pairs(self):
        if not self.correction:
            return None
        c = [float(v) for v in self.correction]
        return list(zip(c[::2], c[1::2]))


def build_config(args):
    names = {f.name for f in fields(RunConfig)}
    values = {k: v for k, v in vars(args).items() if k in names and v is not None}
    src_keys = ("state", "fidelity", "fss_uev", "lifetime_ps")
    if any(getattr(args, k, None) is not None for k in ("source_kind", *src_keys)):
        src = {"kind": getattr(args, "source_kind", None) or "pure-state"}
        for key in src_keys:
            v = getattr(args, key, None)
            if v is not None:
                src[key] = v
        values["source"] = src
    cfg = RunConfig(**values)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                override = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ScanFormatError(f"cannot read config: {exc}", args.config) from None
        unknown = set(override) - names
        if unknown:
            raise ScanFormatError(f"unknown config keys {sorted(unknown)}", args.config)
        if "source" in override:
            override["source"] = {**cfg.source, **override["source"]}
        cfg = replace(cfg, **override)
    return cfg


def _stem(path):
    base = os.path.basename(path)
    for suffix in (".txt", ".result", ".mc"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
    return base


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# -- simulate ----------------------------------------------------------------


def _source(cfg):
    src = dict(cfg.source) or {"kind": "pure-state", "state": "H"}
    kind = src.get("kind", "pure-state")
    if kind == "custom-density":
        if "density_file" in src:
            src["density"] = io.matrix_from_table(io.read_table(src.pop("density_file"), "result"))
        elif "density" in src:
            d = src["density"]
            src["density"] = np.array(d["real"]) + 1j * np.array(d["imag"])
    allowed = {f.name for f in fields(SourceModel)}
    return SourceModel(**{k: v for k, v in src.items() if k in allowed})


def cmd_simulate(args):
    cfg = build_config(args)
    src = _source(cfg)
    bins = args.bins if src.kind == "qd-cascade" else None
    rho_probe = src.density_matrix(0.0 if bins else None)
    n = int(round(np.log2(rho_probe.shape[0])))
    cfg.validate(n)
    wps = default_waveplates(n, cfg.multipliers)
    n_points = cfg.n_points or (400 if n == 1 else 100)
    noisy = bool(cfg.intensity)
    seeds = np.random.SeedSequence(cfg.seed).spawn(max(bins or 1, 1))
    out = args.out_dir
    target = src.target()
    records = []
    times = list(np.linspace(0.0, args.span_ps, bins, endpoint=False)) if bins else [None]
    for k, t in enumerate(times):
        rho = src.density_matrix(t)
        scan = simulate_scan(rho, n_points, wps, time_ps=t)
        proj = simulate_projective(rho) if args.projective else None
        if noisy:
            rng_scan, rng_proj = (np.random.default_rng(s) for s in seeds[k].spawn(2))
            lam = cfg.intensity * src.weight(t or 0.0)
            scan = scan.with_values(poisson_counts(scan.values, lam, rng_scan), "counts")
            if proj is not None:
                proj = proj.with_values(poisson_counts(proj.values, lam, rng_proj), "counts")
        if proj is not None:
            proj = ProjectiveData(proj.labels, proj.values, proj.value_kind, t)
        prefix = "" if bins is None else f"bin_{k:03d}."
        rec = {"scan": f"{prefix}scan.txt", "rho_real": rho.real.tolist(), "rho_imag": rho.imag.tolist()}
        io.write_scan(os.path.join(out, rec["scan"]), scan)
        if proj is not None:
            rec["projective"] = f"{prefix}projective.txt"
            io.write_projective(os.path.join(out, rec["projective"]), proj)
        if t is not None:
            rec["time_ps"] = float(t)
        if target is not None:
            rec["fidelity_to_target"] = fidelity_to_pure(rho, target)
        records.append(rec)
    manifest = {
        "format_version": io.FORMAT_VERSION,
        "source": {k: v for k, v in cfg.source.items() if k != "density"} or {"kind": "pure-state", "state": "H"},
        "target": None if target is None else {"real": target.real.tolist(), "imag": target.imag.tolist()},
        "seed": cfg.seed,
        "intensity": cfg.intensity if noisy else None,
        "n_points": n_points,
        "multipliers": [w.multiplier for w in wps],
        "files": records,
    }
    io.write_json(os.path.join(out, "manifest.json"), manifest)
    print(f"wrote {len(records)} scan(s) to {out}")
    return EXIT_OK


# -- reconstruct -------------------------------------------------------------


def _target_vector(cfg, n):
    if cfg.target is not None:
        psi = named_state(cfg.target)
        if psi.size != 2**n:
            raise ValueError(f"target {cfg.target!r} does not match {n} qubits")
        return psi
    return None


def _corrected(res, cfg):
    pairs = cfg.correction_pairs
    if pairs is None:
        return res
    rho = apply_virtual_waveplate(res.rho, pairs)
    return replace(res, rho=rho)


def _result_header(res, data, path, cfg, target):
    n = int(round(np.log2(res.rho.shape[0])))
    header = {
        "method": res.method,
        "n_qubits": n,
        "source": path,
        "value_kind": data.value_kind,
        "cost": float(res.cost),
        "iterations": res.iterations,
        "converged": res.converged,
        "scale": float(res.scale),
        "normalization": "p_k = value_k / scale" if data.value_kind == "counts" else "none",
        "time_ps": None if data.time_ps is None else float(data.time_ps),
        "correction": cfg.correction,
        "target": cfg.target,
    }
    if target is not None:
        header["fidelity"] = fidelity_to_pure(res.rho, target)
    if n == 2:
        header["concurrence"] = concurrence(res.rho)
    return header


def _reconstruct_one(path, cfg):
    data = io.read_data(path)
    n = data.n_qubits
    target = _target_vector(cfg, n)
    res = _corrected(reconstruct(data, cfg.method, cfg.mle), cfg)
    return data, res, target


def cmd_reconstruct(args):
    cfg = build_config(args).validate()

    def one(path):
        data, res, target = _reconstruct_one(path, cfg)
        out = os.path.join(args.out_dir or os.path.dirname(path) or ".", _stem(path) + ".result.txt")
        io.write_table(out, "result", _result_header(res, data, path, cfg, target), ["row", "col", "real", "imag"], io.matrix_rows(res.rho))
        line = f"{out}: method={res.method} converged={res.converged}"
        if target is not None:
            line += f" fidelity={fidelity_to_pure(res.rho, target):.6f}"
        if res.rho.shape == (4, 4):
            line += f" concurrence={concurrence(res.rho):.6f}"
        print(line)
        return res.converged

    ok = _map(one, args.inputs, cfg.jobs)
    if not all(ok):
        raise ConvergenceError("reconstruction did not converge for at least one input (best-so-far written)")
    return EXIT_OK


# -- montecarlo --------------------------------------------------------------


def _pm(mean, std):
    return f"{mean:.4f} +/- {std:.4f}"


def cmd_montecarlo(args):
    cfg = build_config(args).validate()

    def one(path):
        data, res, target = _reconstruct_one(path, cfg)
        if data.value_kind != "counts":
            raise ValueError(f"{path}: Monte Carlo resampling needs a counts file")

        def recon(d):
            return _corrected(reconstruct(d, cfg.method, cfg.mle), cfg)

        rep = monte_carlo(data, cfg.samples, recon, target, cfg.seed)
        header = {
            "method": res.method,
            "source": path,
            "n_samples": rep.n_samples,
            "seed": cfg.seed,
            "excluded": rep.excluded,
            "time_ps": None if data.time_ps is None else float(data.time_ps),
            "target": cfg.target,
            "correction": cfg.correction,
        }
        msg = [path]
        for name, value in (("fidelity", None if target is None else fidelity_to_pure(res.rho, target)),
                            ("concurrence", concurrence(res.rho) if res.rho.shape == (4, 4) else None)):
            if value is None or name not in rep.metrics:
                continue
            m, s = rep.metrics[name]
            header[name] = float(value)
            header[f"{name}_mean"] = m
            header[f"{name}_std"] = s
            header[f"{name}_pm"] = _pm(value, s)
            msg.append(f"{name} {_pm(value, s)}")
        rows = [
            (i, j, io.fmt(float(rep.mean[i, j].real)), io.fmt(float(rep.mean[i, j].imag)),
             io.fmt(float(rep.std_real[i, j])), io.fmt(float(rep.std_imag[i, j])))
            for i in range(rep.mean.shape[0]) for j in range(rep.mean.shape[1])
        ]
        out = os.path.join(args.out_dir or os.path.dirname(path) or ".", _stem(path) + ".mc.txt")
        io.write_table(out, "mcreport", header, ["row", "col", "mean_real", "mean_imag", "std_real", "std_imag"], rows)
        print("  ".join(msg))
        return out

    _map(one, args.inputs, cfg.jobs)
    return EXIT_OK


# -- fss-fit / compare -------------------------------------------------------


def _metric_point(path):
    """(time_ps, fidelity, sigma, concurrence, concurrence_sigma) of a result or mc file."""
    t = io.read_table(path)
    if t.kind not in ("result", "mcreport"):
        raise ScanFormatError(f"expected a result or mcreport file, found '{t.kind}'", path, 1)
    time_ps = io.header_value(t, "time_ps", float, None, required=False)
    f = io.header_value(t, "fidelity", float, None, required=False)
    fs = io.header_value(t, "fidelity_std", float, 0.0, required=False)
    c = io.header_value(t, "concurrence", float, None, required=False)
    cs = io.header_value(t, "concurrence_std", float, 0.0, required=False)
    return time_ps, f, fs, c, cs


def cmd_fss_fit(args):
    pts = [_metric_point(p) for p in args.inputs]
    for p, (t, f, *_rest) in zip(args.inputs, pts):
        if t is None or f is None:
            raise ScanFormatError("file lacks time_ps or fidelity (reconstruct with --target)", p, 1)
    pts.sort(key=lambda x: x[0])
    series = TimeBinSeries([p[0] for p in pts], [p[1] for p in pts], [p[2] for p in pts])
    if args.shift_ps:
        series = series.shifted(args.shift_ps)
    fit = fss_fit(series)
    header = {
        "fss_uev": fit.fss,
        "fss_err_uev": fit.fss_err,
        "amplitude": fit.amplitude,
        "offset": fit.offset,
        "phase0": fit.phase0,
        "rms": fit.rms,
        "degenerate": fit.degenerate,
        "n_bins": len(pts),
    }
    model = fit.model(series.t_ps)
    rows = [(io.fmt(float(a)), io.fmt(float(b)), io.fmt(float(c)), io.fmt(float(d)))
            for a, b, c, d in zip(series.t_ps, series.fidelity, series.fidelity_sigma, model)]
    io.write_table(args.out, "fssfit", header, ["t_ps", "fidelity", "sigma", "model"], rows)
    print(f"FSS = {fit.fss:.4f} +/- {fit.fss_err:.4f} ueV ({len(pts)} bins){' [degenerate]' if fit.degenerate else ''}")
    return EXIT_OK


def cmd_compare(args):
    summaries = []
    for p in (args.a, args.b):
        _, f, fs, c, cs = _metric_point(p)
        if f is None:
            raise ScanFormatError("file lacks a fidelity (reconstruct with --target)", p, 1)
        summaries.append(MethodSummary(f, fs, c, cs if c is not None else None))
    cmp = compare_methods(*summaries, k=args.k)
    header = {"a": args.a, "b": args.b, "k_sigma": args.k}
    for name, m in cmp.items():
        header[f"{name}_delta"] = m.delta
        header[f"{name}_combined_sigma"] = m.combined_sigma
        header[f"{name}_agree"] = m.agree
        print(f"{name}: delta={m.delta:.4f} combined_sigma={m.combined_sigma:.4f} agree={m.agree}")
    header["agree"] = all(m.agree for m in cmp.values())
    if args.out:
        io.write_table(args.out, "compare", header, ["metric", "delta", "combined_sigma", "agree"],
                       [(k, m.delta, m.combined_sigma, m.agree) for k, m in cmp.items()])
    return EXIT_OK


# -- export-plotdata ---------------------------------------------------------


def _signal_table(data, res=None):
    """Rows and columns of a measured-vs-fit table; ``res`` adds the model column."""
    if isinstance(data, ProjectiveData):
        model = np.einsum("ab,kba->k", res.rho, projective_operators(data.labels)).real
        if data.value_kind == "counts":
            model = model * res.scale
        rows = [(lab, io.fmt(float(v)), io.fmt(float(m))) for lab, v, m in zip(data.labels, data.values, model)]
        return ["basis", "measured", "model_fit"], rows
    fourier = evaluate_series(spectrum_of(data), data.theta)
    cols = ["angle_rad", "measured", "fourier_fit"]
    parts = [data.theta, data.values, fourier]
    if res is not None:
        cols.append("model_fit")
        parts.append(fit_signal(res, data))
    rows = [(f"{row[0]:.11e}", *(io.fmt(float(v)) for v in row[1:])) for row in zip(*parts)]
    return cols, rows


def cmd_export_plotdata(args):
    os.makedirs(args.out_dir, exist_ok=True)
    series = {}
    for path in args.inputs:
        stem = _stem(path)
        t = io.read_table(path)
        if t.kind in ("scan", "projective"):
            data = io.read_data(path)
            if isinstance(data, ProjectiveData):
                raise ScanFormatError("projective files need a reconstruction to plot against", path, 1)
            cols, rows = _signal_table(data)
            io.write_table(os.path.join(args.out_dir, stem + ".fourier.txt"), "plot-signal", {"source": path}, cols, rows)
            continue
        if t.kind == "mcreport":
            # Monte Carlo reports only feed the time series, with their sigma
            time_ps, f, fs, *_ = _metric_point(path)
            if time_ps is not None and f is not None:
                series.setdefault(t.header.get("method", "unknown"), []).append((time_ps, f, fs))
            continue
        if t.kind != "result":
            raise ScanFormatError(f"expected a scan, result or mcreport file, found '{t.kind}'", path, 1)
        rho = io.matrix_from_table(t)
        io.write_table(os.path.join(args.out_dir, stem + ".matrix.txt"), "plot-matrix", {"source": path},
                       ["row", "col", "real", "imag"], io.matrix_rows(rho))
        src = t.header.get("source")
        if src and os.path.exists(src):
            scale = io.header_value(t, "scale", float, 1.0, required=False)
            res = ReconstructionResult(rho, t.header.get("method", "mle"), scale=scale)
            cols, rows = _signal_table(io.read_data(src), res)
            io.write_table(os.path.join(args.out_dir, stem + ".signal.txt"), "plot-signal", {"source": src}, cols, rows)
        time_ps, f, fs, *_ = _metric_point(path)
        if time_ps is not None and f is not None:
            series.setdefault(t.header.get("method", "unknown"), []).append((time_ps, f, fs))
    for method, pts in sorted(series.items()):
        pts.sort()
        io.write_table(os.path.join(args.out_dir, f"series.{method}.txt"), "plot-series",
                       {"method": method, "n_bins": len(pts)}, ["t_ps", "fidelity", "sigma"],
                       [tuple(io.fmt(float(v)) for v in row) for row in pts])
    print(f"wrote plot tables for {len(args.inputs)} file(s) to {args.out_dir}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _common(p, seed=True):
    p.add_argument("--config", help="JSON file whose keys override the flags")
    if seed:
        p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="process input files concurrently")


def _fit_flags(p):
    p.add_argument("--method", choices=["linear", "mle"])
    p.add_argument("--target", help="target state label, e.g. H, L, HV, phi+, psi-")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--correction", type=float, nargs="+", metavar="ANGLE",
                   help="virtual waveplate (theta phi) per qubit, radians")
    p.add_argument("--out-dir", dest="out_dir")


def build_parser():
    parser = argparse.ArgumentParser(prog="ftqst", description="Fourier-transform quantum state tomography")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic scan files")
    _common(p)
    p.add_argument("--source", dest="source_kind", choices=["pure-state", "spdc", "qd-cascade", "custom-density"])
    p.add_argument("--state", help="state label for pure-state / spdc sources")
    p.add_argument("--fidelity", type=float, help="spdc target fidelity")
    p.add_argument("--fss", dest="fss_uev", type=float, help="qd fine-structure splitting (ueV)")
    p.add_argument("--lifetime-ps", dest="lifetime_ps", type=float)
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--span-ps", dest="span_ps", type=float, default=800.0)
    p.add_argument("--samples", "--n-points", dest="n_points", type=int,
                   help="angles per scan (default 400 for one qubit, 100 otherwise)")
    p.add_argument("--intensity", type=float, help=f"expected counts per sample; omit for noiseless (typical value {INTENSITY_PRESET:g})")
    p.add_argument("--multipliers", type=int, nargs="+")
    p.add_argument("--projective", action="store_true", help="also write 16-setting projective data")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct density matrices")
    _common(p, seed=False)
    p.add_argument("inputs", nargs="+")
    _fit_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("montecarlo", help="Monte Carlo uncertainty report")
    _common(p)
    p.add_argument("inputs", nargs="+")
    _fit_flags(p)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("fss-fit", help="sinusoidal FSS fit over time-binned results")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--shift-ps", dest="shift_ps", type=float, default=0.0)
    p.add_argument("--out", default="fss_fit.txt")
    p.set_defaults(func=cmd_fss_fit)

    p = sub.add_parser("compare", help="compare two methods within error bars")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--k", type=float, default=2.0, help="agreement threshold in combined sigmas")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-plotdata", help="plot-ready tables")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out-dir", dest="out_dir", default="plotdata")
    p.set_defaults(func=cmd_export_plotdata)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except FTQSTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
