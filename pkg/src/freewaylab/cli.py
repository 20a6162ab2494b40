"""Command-line entry point.

One executable, nine subcommands:

    model-check       zeros, normal hyperbolicity, well shape
    rho-scan          existence function on an interval, roots to CSV
    connect-freeway   solve a zero-residual connection from a scan root
    connect-tollroad  fold continuation, then one positive-residual orbit
    spectrum          pearling pencil verdict for a connection
    coercivity        deflated smallest-singular-value margin over k
    energy-dress      radial dressing energy audit against the sharp law
    bifurcate         fold data, saddle-node quantities, quadratic law
    report            aggregate prior artifacts into one summary

Artifacts are byte-stable: JSON is emitted with sorted keys and floats
at 17 significant digits, CSV with LF endings.  Every run writes a
manifest recording the config hash and package version; wall time lives
inside the manifest's timestamp field, which is the only
non-deterministic field.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_float_list
from .errors import (ConfigError, DegeneratePairingError, DomainError,
                     ExistenceError, FreewaylabError, NoConvergenceError,
                     NumericalError, PreconditionError)
from .model import PcbModel, normal_hyperbolicity

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOCONV = 3
EXIT_CRITERION = 4
EXIT_IO = 5

COMMANDS = ("model-check", "rho-scan", "connect-freeway", "connect-tollroad",
            "spectrum", "coercivity", "energy-dress", "bifurcate", "report")

PLOT_STUB = """\
#!/usr/bin/env python3
# Plotting stub: renders the CSV artifacts next to this file.
# The pipeline itself only emits data; run this by hand if figures
# are wanted.
import sys
import csv
from pathlib import Path

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib not installed; artifacts remain CSV-only")

for path in sorted(Path(__file__).parent.glob("*.csv")):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    if len(header) < 2 or not data:
        continue
    x = [float(r[0]) for r in data]
    fig, ax = plt.subplots()
    for j in range(1, len(header)):
        ax.plot(x, [float(r[j]) for r in data], label=header[j])
    ax.set_xlabel(header[0])
    ax.legend(loc="best", fontsize="small")
    fig.savefig(path.with_suffix(".png"), dpi=150)
    print("wrote", path.with_suffix(".png"))
"""


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt_float(x):
    if x != x:
        return "NaN"
    if x in (float("inf"), float("-inf")):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def _json_render(obj, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key in sorted(obj):
            val = _json_render(obj[key], indent, level + 1)
            items.append(f'{pad_in}{json.dumps(str(key))}: {val}')
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        items = [pad_in + _json_render(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, np.ndarray):
        return _json_render(obj.tolist(), indent, level)
    return json.dumps(str(obj))


def dump_json(obj, path):
    """Write JSON with sorted keys and 17-significant-digit floats."""
    text = _json_render(obj, 2, 0) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_float(x) if isinstance(x, (float,
                     np.floating)) else str(x) for x in row) + "\n")


def _ensure_plot_stub(outdir):
    path = os.path.join(outdir, "plot_artifacts.py")
    if not os.path.exists(path):
        with open(path, "w", newline="\n") as fh:
            fh.write(PLOT_STUB)


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _worker_count():
    try:
        return max(1, int(os.environ.get("FREEWAYLAB_THREADS", "1")))
    except ValueError:
        return 1


def _build_model(cfg: RunConfig):
    return PcbModel(cfg.pcb_params(), mu=cfg.mu)


def _scan(cfg, model):
    from .singular import rho_scan

    s_min = cfg.task.get("s_min", 1e-4)
    s_max = cfg.task.get("s_max", 0.9)
    n_samples = cfg.task.get("n_samples", 400)
    return rho_scan(model, (s_min, s_max), n_samples=n_samples), \
        (s_min, s_max)


def _solve_freeway_from_root(cfg, model):
    from . import bvp
    from .singular import assemble_singular_orbit

    scan, interval = _scan(cfg, model)
    if not scan.roots:
        raise ExistenceError(
            "no existence-function root on the scanned interval "
            f"[{interval[0]:g}, {interval[1]:g}]")
    idx = cfg.task.get("root_index", 0)
    if not 0 <= idx < len(scan.roots):
        raise ConfigError(
            f"root_index {idx} out of range: {len(scan.roots)} roots found")
    root = scan.roots[idx]
    sing = assemble_singular_orbit(model, root.s,
                                   L_z=cfg.numerics["l_z"],
                                   n_target=cfg.numerics["n_target"])
    guess = bvp.guess_from_singular(model, sing)
    orbit = bvp.solve_freeway(model, guess, tol=cfg.numerics["tol"])
    return root, orbit


def _bifurcation_pipeline(cfg, model):
    from . import bvp, normalform

    root, orbit = _solve_freeway_from_root(cfg, model)
    mu_max = cfg.task.get("mu_max", 1.2)
    branch = bvp.continue_branch(model, orbit, mu_max=mu_max)
    if branch.fold is None:
        raise ExistenceError(
            f"no fold detected on the branch up to mu = {mu_max:g}")
    sn = normalform.pcb_saddle_node(model)
    return root, orbit, branch, sn


# ---------------------------------------------------------------------------
# command implementations (each returns a dict for the summary artifact)


def cmd_model_check(cfg, outdir):
    model = _build_model(cfg)
    zeros = []
    for a in model.zeros:
        verdict, eigs = normal_hyperbolicity(model, a)
        zeros.append({"point": list(map(float, a)),
                      "verdict": verdict,
                      "normally_hyperbolic": verdict == "hyperbolic",
                      "jacobian_eigs_real": [float(np.real(e)) for e in eigs],
                      "jacobian_eigs_imag": [float(np.imag(e)) for e in eigs],
                      "field_norm": float(np.linalg.norm(model.F(a)))})
    u1max = model.well_positive_zero()
    out = {"n_components": model.n, "delta": model.delta, "mu": model.mu,
           "zeros": zeros, "well_positive_zero": float(u1max)}
    dump_json(out, os.path.join(outdir, "model_check.json"))
    return out


def cmd_rho_scan(cfg, outdir):
    model = _build_model(cfg)
    scan, interval = _scan(cfg, model)
    rows = [(s, r, rp, 0, 0) for s, r, rp in
            zip(scan.s.tolist(), scan.rho.tolist(),
                scan.rho_prime.tolist())]
    rows += [(r.s, 0.0, r.rho_prime, 1, int(r.condition_ok))
             for r in scan.roots]
    rows.sort(key=lambda row: row[0])
    write_csv(os.path.join(outdir, "rho_scan.csv"),
              ["s", "rho", "rho_prime", "is_root", "condition_ok"], rows)
    roots = [{"s": r.s, "rho_prime": r.rho_prime,
              "transverse": bool(r.transverse),
              "condition_ok": bool(r.condition_ok)} for r in scan.roots]
    out = {"interval": list(interval), "roots": roots,
           "tangency_candidates": list(scan.tangency_candidates)}
    dump_json(out, os.path.join(outdir, "rho_roots.json"))
    _ensure_plot_stub(outdir)
    return out


def cmd_connect_freeway(cfg, outdir):
    from . import bvp
    from .energy import hamiltonian_trace, reduced_energy

    model = _build_model(cfg)
    root, orbit = _solve_freeway_from_root(cfg, model)
    energy = reduced_energy(model, orbit)
    _, hmax = hamiltonian_trace(model, orbit)
    bvp.save_orbit(orbit, os.path.join(outdir, "freeway_orbit.csv"),
                   os.path.join(outdir, "freeway_orbit.json"),
                   energy=energy)
    out = {"root_s": root.s, "mu": orbit.mu,
           "residual_norm": orbit.residual_norm,
           "max_u1": float(orbit.u_values[:, 0].max()),
           "amplitude_gap": float(abs(orbit.u_values[:, 0].max() - root.s)),
           "reduced_energy": energy, "hamiltonian_max": hmax,
           "n_nodes": len(orbit.grid)}
    dump_json(out, os.path.join(outdir, "connect_freeway.json"))
    _ensure_plot_stub(outdir)
    return out


def cmd_connect_tollroad(cfg, outdir):
    from . import bvp, normalform
    from .energy import hamiltonian_trace, reduced_energy

    model = _build_model(cfg)
    _, _, branch, sn = _bifurcation_pipeline(cfg, model)
    fold = branch.fold
    offset = cfg.task.get("offset", 4e-4)
    [(mu, energy, orbit)] = normalform.tollroad_ladder(
        model, fold.orbit, sn, [offset], tol=cfg.numerics["tol"])
    _, hmax = hamiltonian_trace(model.with_mu(mu), orbit)
    bvp.save_orbit(orbit, os.path.join(outdir, "tollroad_orbit.csv"),
                   os.path.join(outdir, "tollroad_orbit.json"),
                   energy=energy)
    out = {"mu": mu, "mu_fold": fold.mu_sn, "offset": offset,
           "residual_norm": orbit.residual_norm,
           "reduced_energy": energy, "hamiltonian_max": hmax,
           "v_max": float(np.abs(orbit.v_values).max())}
    dump_json(out, os.path.join(outdir, "connect_tollroad.json"))
    _ensure_plot_stub(outdir)
    return out


def cmd_spectrum(cfg, outdir):
    from .spectral import geometric_criterion, linearize, pencil_spectrum

    model = _build_model(cfg)
    root, orbit = _solve_freeway_from_root(cfg, model)
    Ldata = linearize(model, orbit, stencil=cfg.numerics["stencil"])
    window = (cfg.numerics["window_min"], cfg.numerics["window_max"],
              cfg.numerics["window_count"])
    report = pencil_spectrum(Ldata, window=window)
    geom = geometric_criterion(model, root.s)
    out = {"root_s": root.s,
           "pencil_eigs": [[float(np.real(k)), float(np.imag(k))]
                           for k in report.pencil_eigs],
           "kernel_dim": report.kernel_dim,
           "kernel_parities": list(report.kernel_parities),
           "positive_real": [float(k) for k in report.positive_real],
           "verdict": report.verdict,
           "margin": report.margin,
           "argmin_k": report.argmin_k,
           "window": list(window),
           "geometric_criterion": geom,
           "kernel_residual": Ldata.kernel_residual}
    dump_json(out, os.path.join(outdir, "spectrum.json"))
    if report.verdict == "degenerate":
        raise NumericalError("pencil verdict degenerate")
    return out


def cmd_coercivity(cfg, outdir):
    from .spectral import coercivity_margin, linearize

    model = _build_model(cfg)
    root, orbit = _solve_freeway_from_root(cfg, model)
    Ldata = linearize(model, orbit, stencil=cfg.numerics["stencil"])
    k_grid = np.linspace(0.0, cfg.numerics["k_max"], cfg.numerics["n_k"])
    result = coercivity_margin(Ldata, k_grid=k_grid,
                               gamma0=cfg.numerics["gamma0"])
    write_csv(os.path.join(outdir, "coercivity.csv"),
              ["k", "sigma_min"],
              zip(result["k_grid"].tolist(), result["values"].tolist()))
    out = {"root_s": root.s, "margin": result["margin"],
           "argmin_k": result["argmin_k"],
           "warning": bool(result["warning"]),
           "gamma0": cfg.numerics["gamma0"],
           "k_max": cfg.numerics["k_max"], "n_k": cfg.numerics["n_k"]}
    dump_json(out, os.path.join(outdir, "coercivity.json"))
    _ensure_plot_stub(outdir)
    if result["warning"]:
        raise NumericalError(
            f"coercivity margin {result['margin']:.3e} below floor")
    return out


def cmd_energy_dress(cfg, outdir):
    from .energy import (dress, full_energy_radial,
                         sharp_interface_prediction,
                         sharp_interface_prediction_corrected)

    model = _build_model(cfg)
    _, orbit = _solve_freeway_from_root(cfg, model)
    d = cfg.task.get("d", 2)
    R = cfg.task.get("radius", 1.0)
    ell = cfg.task.get("ell", 0.2)
    eps_list = parse_float_list(cfg.task.get("eps", "0.02,0.01,0.005"),
                                "eps")
    rows, audits = [], []
    last_dressed = None
    for eps in eps_list:
        dressed = dress(model, orbit, d, R, eps, ell)
        last_dressed = dressed
        full = full_energy_radial(model, dressed)
        sharp = sharp_interface_prediction(model, orbit, d, R, eps)
        corr = sharp_interface_prediction_corrected(model, orbit, d, R, eps)
        ratio = full / sharp
        rows.append((eps, full, sharp, ratio, full / corr))
        audits.append({"eps": eps, "full_energy": full,
                       "sharp_prediction": sharp, "ratio": ratio,
                       "corrected_prediction": corr,
                       "ratio_corrected": full / corr,
                       "scale_flag": dressed.scale_flag})
    profile_rows = [(float(r),) + tuple(float(x) for x in row)
                    for r, row in zip(last_dressed.r_grid,
                                      last_dressed.values)]
    write_csv(os.path.join(outdir, "radial_profile.csv"),
              ["r"] + [f"u{i+1}" for i in range(model.n)], profile_rows)
    write_csv(os.path.join(outdir, "energy_dress.csv"),
              ["eps", "full_energy", "sharp_prediction", "ratio",
               "ratio_corrected"], rows)
    orders = []
    for a, b in zip(audits[:-1], audits[1:]):
        da, db = abs(a["ratio"] - 1.0), abs(b["ratio"] - 1.0)
        if db > 0:
            orders.append(float(np.log(da / db)
                                / np.log(a["eps"] / b["eps"])))
    out = {"d": d, "radius": R, "ell": ell, "audits": audits,
           "empirical_orders": orders}
    dump_json(out, os.path.join(outdir, "energy_dress.json"))
    _ensure_plot_stub(outdir)
    return out


def cmd_bifurcate(cfg, outdir):
    from . import bvp, normalform

    model = _build_model(cfg)
    _, _, branch, sn = _bifurcation_pipeline(cfg, model)
    fold = branch.fold
    bvp.save_branch(branch, os.path.join(outdir, "branch.csv"))
    offsets = parse_float_list(
        cfg.task.get("offsets", "1e-4,2e-4,4e-4,8e-4,16e-4"), "offsets")
    ladder = normalform.tollroad_ladder(model, fold.orbit, sn, offsets,
                                        tol=cfg.numerics["tol"])
    samples = [(mu, F1) for mu, F1, _ in ladder]
    fit = normalform.verify_quadratic_law(samples, sn, mu_fold=fold.mu_sn)
    write_csv(os.path.join(outdir, "tollroad_energy.csv"),
              ["mu", "F1"], samples)
    out = {"s_sn": sn.s_sn, "mu_sn": sn.mu_sn, "s1": sn.s1,
           "F1_coeff": sn.F1_coeff,
           "mu_fold_continuation": fold.mu_sn,
           "fold_smallest_sv": fold.smallest_sv,
           "fitted_coeff": fit.coefficient,
           "ratio": fit.ratio,
           "predicted_solvability": fit.predicted_solvability,
           "ratio_solvability": fit.ratio_solvability,
           "r_squared": fit.r_squared,
           "ladder_warning": bool(fit.warning)}
    dump_json(out, os.path.join(outdir, "bifurcate.json"))
    _ensure_plot_stub(outdir)
    return out


def cmd_report(cfg, outdir):
    pieces = {}
    names = ["model_check", "rho_roots", "connect_freeway",
             "connect_tollroad", "spectrum", "coercivity", "energy_dress",
             "bifurcate"]
    raw = cfg.task.get("artifacts", "")
    search_dirs = [outdir] + [p for p in raw.split(",") if p.strip()]
    for name in names:
        for d in search_dirs:
            path = os.path.join(d, name + ".json")
            if os.path.exists(path):
                with open(path) as fh:
                    pieces[name] = json.load(fh)
                break
    checks = {}
    if "spectrum" in pieces:
        checks["left_root_verdict_robust"] = \
            pieces["spectrum"]["verdict"] == "robust"
    if "energy_dress" in pieces:
        audits = pieces["energy_dress"]["audits"]
        checks["energy_audit_final_ratio"] = audits[-1]["ratio"]
        if "ratio_corrected" in audits[-1]:
            checks["energy_audit_final_ratio_corrected"] = \
                audits[-1]["ratio_corrected"]
    if "connect_freeway" in pieces:
        checks["freeway_energy_zero"] = \
            abs(pieces["connect_freeway"]["reduced_energy"]) <= 1e-14
    if "bifurcate" in pieces:
        checks["quadratic_law_ratio"] = pieces["bifurcate"]["ratio"]
        checks["quadratic_law_ratio_solvability"] = \
            pieces["bifurcate"]["ratio_solvability"]
    out = {"artifacts_found": sorted(pieces), "checks": checks,
           "sections": pieces}
    dump_json(out, os.path.join(outdir, "report.json"))
    return out


HANDLERS = {
    "model-check": cmd_model_check,
    "rho-scan": cmd_rho_scan,
    "connect-freeway": cmd_connect_freeway,
    "connect-tollroad": cmd_connect_tollroad,
    "spectrum": cmd_spectrum,
    "coercivity": cmd_coercivity,
    "energy-dress": cmd_energy_dress,
    "bifurcate": cmd_bifurcate,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# driver


def _write_manifest(outdir, command, cfg, t0, status):
    manifest = {
        "command": command,
        "config_sha256": cfg.digest(),
        "version": __version__,
        "workers": _worker_count(),
        "exit_status": status,
        "timestamp": {
            "utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "wall_time_s": time.monotonic() - t0,
        },
    }
    dump_json(manifest, os.path.join(outdir, "manifest.json"))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="freewaylab",
        description="Connecting orbits, pearling spectra, and bifurcation "
                    "energetics for multicomponent bilayer models.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {}
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__doc__)
        p.add_argument("--config", required=True,
                       help="path to the INI run configuration")
        p.add_argument("--out", default=None,
                       help="output directory (overrides [run] output_dir)")
        parsers[name] = p
    sp = parsers["spectrum"]
    sp.add_argument("--window", nargs=3, type=float, default=None,
                    metavar=("RE_MIN", "RE_MAX", "IM_MAX"),
                    help="pencil eigenvalue window")
    for name in ("spectrum", "coercivity"):
        parsers[name].add_argument("--gamma0", type=float, default=None)
        parsers[name].add_argument("--kmax", type=float, default=None)
        parsers[name].add_argument("--kpoints", type=int, default=None)
    ed = parsers["energy-dress"]
    ed.add_argument("--dim", type=int, choices=(2, 3), default=None)
    ed.add_argument("--radius", type=float, default=None)
    ed.add_argument("--eps", type=str, default=None,
                    help="comma-separated epsilon values")
    ed.add_argument("--ell", type=float, default=None)
    return parser


def _apply_flags(cfg, args):
    if getattr(args, "window", None) is not None:
        cfg.numerics["window_min"] = args.window[0]
        cfg.numerics["window_max"] = args.window[1]
        cfg.numerics["window_count"] = int(args.window[2])
    if getattr(args, "gamma0", None) is not None:
        cfg.numerics["gamma0"] = args.gamma0
    if getattr(args, "kmax", None) is not None:
        cfg.numerics["k_max"] = args.kmax
    if getattr(args, "kpoints", None) is not None:
        cfg.numerics["n_k"] = args.kpoints
    if getattr(args, "dim", None) is not None:
        cfg.task["d"] = args.dim
    if getattr(args, "radius", None) is not None:
        cfg.task["radius"] = args.radius
    if getattr(args, "eps", None) is not None:
        cfg.task["eps"] = args.eps
    if getattr(args, "ell", None) is not None:
        cfg.task["ell"] = args.ell


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.monotonic()
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = args.out if args.out is not None else cfg.output_dir
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    status = EXIT_OK
    try:
        _apply_flags(cfg, args)
        np.random.seed(cfg.seed)
        HANDLERS[args.command](cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    except (NoConvergenceError, ExistenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        status = EXIT_NOCONV
    except (NumericalError, DegeneratePairingError, DomainError,
            PreconditionError) as exc:
        print(f"criterion violation: {exc}", file=sys.stderr)
        status = EXIT_CRITERION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        status = EXIT_IO
    except FreewaylabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_CRITERION
    try:
        _write_manifest(outdir, args.command, cfg, t0, status)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        status = EXIT_IO
    return status


if __name__ == "__main__":
    sys.exit(main())
