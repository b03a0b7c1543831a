"""Command line front end: ``isomwalk <subcommand> --config <path>``.

Exit codes: 0 all checks pass, 2 some check failed, 3 inconclusive,
1 usage or IO error. Every run prints its seed; rerunning with the same
config and seed reproduces every number in the report.
"""

import argparse
import os
import sys

import numpy as np

from isomwalk import catalog
from isomwalk.config import (
    EXPERIMENTS,
    ExperimentConfig,
    build_group,
    build_measure,
    format_config,
    read_config,
    write_measure_file,
)
from isomwalk.errors import CapExceeded, ConfigError, DimensionMismatch, IsomwalkError
from isomwalk.limits import (
    BumpSpec,
    VerificationReport,
    clt_check,
    fourier_range_check,
    limit_parameters,
    llt_check,
    multiscale_check,
    skew_direction,
)
from isomwalk.measure import (
    check_almost_nondegenerate,
    check_condition_C,
    check_condition_E,
    check_ssr_diagnostic,
    coset_defect,
)
from isomwalk.plots import emit_plots
from isomwalk.spectral import band_overflow, build_grid, propagate, psi0, s_r_norm, write_field_csv, write_grid_csv
from isomwalk.walker import WalkConfig, simulate_many, write_endpoints

EXIT_PASS, EXIT_USAGE, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
VERDICT_EXIT = {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}
USAGE_ERRORS = (ConfigError, CapExceeded, DimensionMismatch, OSError)

# name -> (experiment, [experiment] params, uses a measure file)
EXAMPLES = {
    "square_lattice": ("verify-clt", {"l": [100, 400], "samples": 100000, "seed": 1}, True),
    "line_lattice": ("verify-fourier", {"l": [400], "samples": 100000, "seed": 1}, True),
    "rotation_rich": ("verify-llt", {"l": [500, 1000], "samples": 1000000, "seed": 1,
                                     "bump_center": [0.0, 0.0], "bump_radius": 4.0}, True),
    "skew_turn": ("verify-multiscale", {"l": [12, 24, 48, 96, 192], "samples": 1000000, "seed": 1,
                                        "scale_exponent": -0.25, "offset": 1.5}, True),
    "half_turns": ("params", {}, True),
    "conditions": ("conditions", {"k_max": 3}, False),
    "spectrum": ("spectrum", {"r": [0.01, 0.03, 0.1, 0.3], "resolution": 128, "seed": 0}, False),
}
# examples without a measure file name a catalog measure instead
EXAMPLE_CATALOG = {"conditions": "rotation_rich", "spectrum": "rotation_rich"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: usage: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


# ----------------------------------------------------------------------
# experiments

def _l_list(cfg, default):
    return list(cfg.get("l", default))


def run_params(cfg, mu, group, seed, threads):
    lp = limit_parameters(mu, group)
    rows = [{"quantity": "v0", "value": lp.drift.v0},
            {"quantity": "fixed_point", "value": lp.drift.fixed_point},
            {"quantity": "theta0", "value": lp.theta0},
            {"quantity": "delta", "value": lp.delta.matrix},
            {"quantity": "delta0", "value": lp.delta0.matrix},
            {"quantity": "covariance_rate", "value": lp.covariance_rate()},
            {"quantity": "group", "value": f"{lp.group.kind}:{lp.group.continuous or lp.group.order}"}]
    defect = coset_defect(lp.drift.centered, lp.group)
    rows.append({"quantity": "coset_defect", "value": defect})
    findings = []
    if not lp.delta0.positive_definite:
        findings.append("DegenerateForm: Delta_0 is not positive definite")
    if defect > 1e-6:
        findings.append(f"rotation parts leave theta0 K (defect {defect:.3g}); theta0 is the first atom")
    return VerificationReport("params", {"atoms": mu.size, "dim": mu.dim}, rows, "pass", seed,
                              findings=findings)


def run_simulate(cfg, mu, group, seed, threads, out_dir):
    l_list = _l_list(cfg, [100])
    freqs = cfg.get("frequencies")
    wc = WalkConfig(0, cfg.get("samples", 10000), x0=cfg.get("x0"), seed=seed,
                    store_endpoints=cfg.get("store_endpoints", False),
                    frequencies=None if freqs is None else np.array(freqs),
                    abs_orders=tuple(cfg.get("abs_orders", ())), threads=threads)
    ens = simulate_many(mu, wc, l_list)
    rate = limit_parameters(mu, group).covariance_rate()
    rows = []
    for e in ens:
        row = {"l": e.steps, "mean": e.mean, "covariance": e.covariance,
               "trace_rate": float(np.trace(e.covariance)) / max(e.steps, 1),
               "predicted_trace_rate": float(np.trace(rate))}
        for a, v in sorted(e.abs_moments.items()):
            row[f"abs_moment_{a:g}"] = v
        for k, c in enumerate(e.charfn):
            row[f"charfn_{k}"] = c.value
            row[f"charfn_{k}_se"] = c.standard_error
        rows.append(row)
        if e.endpoints is not None:
            write_endpoints(os.path.join(out_dir, f"endpoints_l{e.steps}.bin"), e.endpoints)
    return VerificationReport("simulate", {"l_list": l_list, "samples": wc.samples, "x0": wc.x0,
                                           "frequencies": freqs}, rows, "pass", seed)


def run_spectrum(cfg, mu, group, seed, threads, out_dir):
    grid = build_grid(mu.dim, cfg.get("resolution"))
    r_list = list(cfg.get("r", [0.01, 0.1, 1.0]))
    iters, tol = cfg.get("power_iters", 5000), cfg.get("tol", 1e-8)
    rows = []
    for r in r_list:
        est = s_r_norm(mu, r, grid, iters, tol, seed)
        # energy of the translation multipliers above the grid band, a proxy for interpolation error
        residual = max(band_overflow(psi0(v, r, grid).values, grid) for v in mu.translations)
        rows.append({"r": r, "norm": est.value, "gap": 1.0 - est.value, "converged": est.converged,
                     "iterations": est.iterations, "band_residual": residual})
    findings = []
    if cfg.get("dump_field", False):
        x0 = np.zeros(mu.dim) if cfg.get("x0") is None else np.array(cfg.get("x0"))
        fld = propagate(mu, r_list[0], psi0(x0, r_list[0], grid), cfg.get("field_steps", 1))
        write_field_csv(os.path.join(out_dir, "field.csv"), fld)
        write_grid_csv(os.path.join(out_dir, "grid.csv"), grid)
    if not all(row["converged"] for row in rows):
        findings.append("power iteration did not converge for some r")
    verdict = "pass" if all(row["converged"] for row in rows) else "inconclusive"
    return VerificationReport("spectrum", {"r": r_list, "resolution": grid.resolution, "grid_size": grid.size},
                              rows, verdict, seed, tolerances={"tol": tol, "power_iters": iters},
                              findings=findings)


def run_conditions(cfg, mu, group, seed, threads):
    reports = [check_condition_C(mu), check_condition_E(mu, group, cfg.get("probe_count", 64), seed=seed),
               check_ssr_diagnostic(group), check_almost_nondegenerate(mu, k_max=cfg.get("k_max", 3))]
    rows = [{"condition": r.condition, "verdict": r.verdict, "level": r.level, "witness": r.witness}
            for r in reports]
    verdict = "inconclusive" if any(r.verdict == "inconclusive" for r in reports) else "pass"
    return VerificationReport("conditions", {"group": group.kind}, rows, verdict, seed,
                              findings=[f"{r.condition}: {r.details}" for r in reports if r.details])


def run_experiment(name, cfg: ExperimentConfig, seed, threads, out_dir):
    mu = build_measure(cfg)
    group = build_group(cfg, mu)
    x0 = cfg.get("x0")
    if name == "params":
        return run_params(cfg, mu, group, seed, threads)
    if name == "simulate":
        return run_simulate(cfg, mu, group, seed, threads, out_dir)
    if name == "spectrum":
        return run_spectrum(cfg, mu, group, seed, threads, out_dir)
    if name == "conditions":
        return run_conditions(cfg, mu, group, seed, threads)
    samples = cfg.get("samples", 100000)
    if name == "verify-clt":
        return clt_check(mu, _l_list(cfg, [100, 400]), samples, seed, x0, group, threads,
                         rel_tol=cfg.get("rel_tol", 0.05), sigma_mult=cfg.get("sigma_mult", 4.0))
    if name == "verify-llt":
        center = cfg.get("bump_center", [0.0] * mu.dim)
        spec = BumpSpec(tuple(center), cfg.get("bump_radius", 1.0))
        return llt_check(mu, _l_list(cfg, [100, 400]), samples, seed, spec, x0, group, threads,
                         stab_tol=cfg.get("stab_tol", 0.10), pred_tol=cfg.get("pred_tol", 0.15),
                         sigma_mult=cfg.get("sigma_mult", 4.0))
    if name == "verify-multiscale":
        direction = cfg.get("direction")
        direction = skew_direction(mu) if direction is None else np.array(direction)
        return multiscale_check(mu, _l_list(cfg, [12, 24, 48, 96]), samples, seed,
                                cfg.get("scale_exponent", -0.25), cfg.get("offset", 1.0), direction, x0,
                                group, threads, ratio_tol=cfg.get("ratio_tol", 5.0),
                                sigma_mult=cfg.get("sigma_mult", 3.0))
    if name == "verify-fourier":
        l_list = _l_list(cfg, [400])
        if len(l_list) != 1:
            raise ConfigError("verify-fourier takes a single l")
        return fourier_range_check(mu, l_list[0], samples, seed, x0, group, threads,
                                   n_low=cfg.get("n_low", 10), n_high=cfg.get("n_high", 16),
                                   c_bound=cfg.get("c_bound", 0.0), sigma_mult=cfg.get("sigma_mult", 4.0),
                                   decay=cfg.get("decay", float(np.exp(-3.0))))
    raise ConfigError(f"unknown experiment {name!r}")


# ----------------------------------------------------------------------
# output

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    if isinstance(v, complex):
        return f"{v.real:.4g}{v.imag:+.4g}j"
    if isinstance(v, str):
        return v
    if isinstance(v, np.ndarray) and v.size <= 9 and v.dtype.kind in "fi":
        rows = np.atleast_2d(v)
        return "[" + "; ".join(" ".join(f"{x:.6g}" for x in r) for r in rows) + "]"
    return None


def summary_table(report):
    """Scalar columns of the report rows as aligned text."""
    if not report.rows:
        return ""
    keys = [k for k in report.rows[0] if _cell(report.rows[0][k]) is not None]
    table = [keys] + [[_cell(row.get(k)) or "" for k in keys] for row in report.rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(keys))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in table)


def write_outputs(report, out_dir, plots=True):
    os.makedirs(out_dir, exist_ok=True)
    report.to_json(os.path.join(out_dir, "report.json"))
    paths = [os.path.join(out_dir, "report.json")]
    if report.rows:
        report.write_csv(os.path.join(out_dir, "report.csv"))
        paths.append(os.path.join(out_dir, "report.csv"))
    for name, rows in sorted(report.panels.items()):
        if rows:
            path = os.path.join(out_dir, f"{name}.csv")
            report.write_csv(path, rows)
            paths.append(path)
    notes = []
    if plots:
        svgs, notes = emit_plots(report, out_dir)
        paths += svgs
    return paths, notes


def cmd_run(args):
    cfg = read_config(args.config)
    if cfg.experiment is not None and cfg.experiment != args.command:
        raise ConfigError(f"{args.config} is a {cfg.experiment!r} config, not {args.command!r}")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    out_dir = args.out or cfg.output.get("dir") or "isomwalk-out"
    if not os.path.isabs(out_dir) and args.out is None and "dir" in cfg.output:
        out_dir = os.path.join(cfg.base_dir, out_dir)
    os.makedirs(out_dir, exist_ok=True)
    print(f"experiment: {args.command}")
    print(f"seed: {seed}")
    report = run_experiment(args.command, cfg, seed, args.threads, out_dir)
    paths, notes = write_outputs(report, out_dir, cfg.output.get("plots", True))
    table = summary_table(report)
    if table:
        print(table)
    for f in report.findings:
        print(f"finding: {f}")
    for n in notes:
        print(f"note: {n}")
    for key, val in sorted(report.fits.items()):
        print(f"fit {key}: {_cell(val) if _cell(val) is not None else val}")
    print(f"verdict: {report.verdict}")
    print(f"wrote: {', '.join(paths)}")
    return VERDICT_EXIT[report.verdict]


def example_config(name):
    """Config (and measure, if file based) for a named example."""
    if name not in EXAMPLES:
        raise ConfigError(f"unknown example {name!r}; known: {sorted(EXAMPLES)}")
    experiment, params, with_file = EXAMPLES[name]
    cfg = ExperimentConfig(experiment=experiment, params=dict(params))
    if with_file:
        cfg.measure["file"] = f"{name}.measure"
        mu = catalog.by_name(name)
    else:
        cfg.measure["example"] = EXAMPLE_CATALOG[name]
        mu = None
    cfg.output.update({"dir": f"out-{name}", "plots": True})
    return cfg, mu


def cmd_init_example(args):
    if args.name is None:
        for name in sorted(EXAMPLES):
            print(f"{name}: {EXAMPLES[name][0]}")
        return EXIT_PASS
    cfg, mu = example_config(args.name)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"{args.name}.cfg")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))
    print(f"wrote: {path}")
    if mu is not None:
        mpath = os.path.join(out, cfg.measure["file"])
        write_measure_file(mpath, mu, comment=f"example measure {args.name}")
        print(f"wrote: {mpath}")
    return EXIT_PASS


def build_parser():
    p = _Parser(prog="isomwalk", description="Random walks by random isometries: limit laws and checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--out", help="output directory (default from config, else ./isomwalk-out)")
        sp.add_argument("--seed", type=_u64, help="override the config seed")
        sp.add_argument("--threads", type=_positive_int,
                        help="worker threads (default from ISOMWALK_THREADS, else 1)")
    sp = sub.add_parser("init-example", help="write an example config; no name lists the examples")
    sp.add_argument("name", nargs="?")
    sp.add_argument("--out", help="directory for the written files (default .)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "init-example":
            return cmd_init_example(args)
        return cmd_run(args)
    except USAGE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IsomwalkError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
