"""Command line entry point: ``snls <subcommand> [flags]``.

Every subcommand exits with status 1 when one of its checks fails and prints the
failing metric; status 2 is reserved for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _load_config(args):
    from .config import parse_config
    from .scenarios import scenario

    if args.config and args.scenario:
        raise SystemExit("give either --config or --scenario, not both")
    if args.config:
        cfg = parse_config(Path(args.config).read_text())
    else:
        cfg = scenario(args.scenario or "desk-focusing")
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _refined(cfg, k: int):
    """Config and path with ``dt`` halved ``k`` times by bridge refinement."""
    from .diagnostics import base_path
    from .noise import refine_path

    path = base_path(cfg)
    for _ in range(k):
        path = refine_path(path)
    return replace(cfg, dt=path.dt), path


def _emit(text: str, out: Path | None, name: str):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text if text.endswith("\n") else text + "\n")


def _finish(report) -> int:
    for c in report.checks:
        print(c.line())
    failed = [c for c in report.checks if not c.passed]
    for c in failed:
        print(f"failed check {c.name}: metric {c.metric!r} vs threshold {c.threshold!r}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def _table(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2)
    cols = list(rows[0]) if rows else []
    if fmt == "csv":
        lines = [",".join(cols)]
        for r in rows:
            lines.append(",".join(f'"{r[c]}"' if "," in str(r[c]) else str(r[c]) for c in cols))
        return "\n".join(lines)
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    lines += ["  ".join(str(r[c]).ljust(widths[c]) for c in cols) for r in rows]
    return "\n".join(lines)


# subcommands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .diagnostics import evaluate_checks
    from .io import emit_plot_data, persist
    from .runner import RunFailed, run

    cfg = _load_config(args)
    cfg, path = _refined(cfg, args.refine)
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    try:
        record = run(cfg, path=path)
    except RunFailed as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    out = args.out or cfg.output_dir
    if out:
        persist(record, out)
        print(f"wrote {out}")
    else:
        sys.stdout.write(emit_plot_data(record, "norms", args.format))
    meta = record.metadata
    print(f"steps={meta['steps']} wall_time={meta['wall_time']:.2f}s blowup_suspected_at={meta['blowup_suspected_at']}",
          file=sys.stderr)
    report = evaluate_checks(record, cfg.diagnostics) if cfg.diagnostics else None
    return _finish(report) if report else EXIT_OK


def cmd_verify(args) -> int:
    from .diagnostics import CheckResult, evaluate_checks, report_csv
    from .io import load, series_csv
    from .runner import run

    directory = Path(args.run_dir)
    stored = load(directory)
    record = run(stored.config, path=stored.path)
    report = evaluate_checks(record, stored.config.diagnostics or None)
    same = series_csv(record.series) == (directory / "series.csv").read_text()
    report.add(CheckResult("rerun_identical", 0.0 if same else 1.0, 0.0, same))
    out = Path(args.out) if args.out else directory
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "checks.csv").write_text(report_csv(report))
    return _finish(report)


def _study_cmd(args, studies) -> int:
    from .diagnostics import DiagnosticReport, report_csv

    cfg = _load_config(args)
    levels = max(3, args.refine + 1)
    # the config dt is the finest level; the study starts 2^(levels-1) times coarser
    steps = cfg.T / (cfg.dt * 2 ** (levels - 1))
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
        raise ValueError(f"dt * 2^{levels - 1} must divide T = {cfg.T} for a {levels}-level study")
    cfg = replace(cfg, dt=cfg.T / round(steps))
    report = DiagnosticReport()
    for study in studies:
        report.add(study(cfg, levels))
    text = report.to_json() if args.format == "json" else report_csv(report)
    _emit(text, Path(args.out) if args.out else None, "convergence." + args.format)
    return _finish(report)


def cmd_equivalence(args) -> int:
    from .diagnostics import equivalence_study

    return _study_cmd(args, [equivalence_study])


def cmd_convergence(args) -> int:
    from .diagnostics import equivalence_study, rescaled_mass_study, residual_study

    table = {"residual": residual_study, "equivalence": equivalence_study, "rescaled-mass": rescaled_mass_study}
    return _study_cmd(args, [table[c] for c in args.check or ["residual", "equivalence"]])


def cmd_picard(args) -> int:
    from .picard import picard_lab

    if args.config or args.scenario:
        cfg = _load_config(args)
    else:
        from .scenarios import scenario

        cfg = scenario("picard-desk")
    changes = {}
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.d is not None and args.d != cfg.d:
        from .config import default_grid

        n, L = default_grid(args.d) if args.d == 1 else (64 if args.d == 2 else 32, 8 * np.pi)
        changes.update(d=args.d, n=n, L=L,
                       initial=replace(cfg.initial, center=(0.0,) * args.d),
                       noise=[replace(p, center=0.0) for p in cfg.noise])
    if args.seed is not None:
        changes["seed"] = args.seed
    cfg = replace(cfg, **changes)
    cfg, path = _refined(cfg, args.refine)
    rep = picard_lab(cfg, samples=args.samples, iterations=args.iterations,
                     contraction_pairs=args.pairs, path=path)
    checks = {
        "kappa_hat": (rep["kappa_hat"], 0.6, rep["kappa_hat"] <= 0.6),
        "geometric_vs_kappa": (abs(rep["geometric_ratio"] - rep["kappa_hat"]), 0.15,
                               abs(rep["geometric_ratio"] - rep["kappa_hat"]) <= 0.15),
        "solver_match_linf_l2": (rep["solver_match_linf_l2"], 1e-3, rep["solver_match_linf_l2"] <= 1e-3),
    }
    rep["checks"] = {k: {"metric": m, "threshold": t, "passed": bool(p)} for k, (m, t, p) in checks.items()}
    _emit(json.dumps(rep, indent=2), Path(args.out) if args.out else None, "picard.json")
    failed = [k for k, (_, _, p) in checks.items() if not p]
    for k in failed:
        m, t, _ = checks[k]
        print(f"failed check {k}: metric {m!r} vs threshold {t!r}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def _dims(spec: str) -> list[int]:
    if "-" in spec:
        lo, hi = spec.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in spec.split(",")]


def cmd_pairs(args) -> int:
    from .exponents import CONTEXTS, admitted_alpha_range, proof_pair

    alpha = Fraction(args.alpha)
    rows, bad = [], 0
    for d in _dims(args.d):
        for ctx in [args.context] if args.context else CONTEXTS:
            try:
                rng = admitted_alpha_range(d, ctx)
            except ValueError:
                continue
            if alpha not in rng:
                continue
            pair = proof_pair(d, alpha, ctx)
            ok = bool(pair.certificate)
            bad += not ok
            rows.append({"d": d, "context": ctx, "alpha": str(alpha), "p": str(pair.p), "q": str(pair.q),
                         "admissible": ok})
    if not rows:
        print(f"no proof pair for alpha = {alpha} in the requested dimensions", file=sys.stderr)
        return EXIT_FAILED
    print(_table(rows, args.format or "text"))
    return EXIT_FAILED if bad else EXIT_OK


def cmd_check_powers(args) -> int:
    from .exponents import SCOPES, power_range

    rows, outside = [], []
    alpha = Fraction(args.alpha) if args.alpha is not None else None
    for d in _dims(args.d):
        for scope in [args.scope] if args.scope else SCOPES:
            for lam in ([args.lam] if args.lam else [1, -1]) if scope.startswith("global") else [None]:
                try:
                    rng = power_range(d, scope, s=0 if scope == "scaling" else None, lam=lam)
                except ValueError:
                    continue
                row = {"d": d, "scope": scope, "lambda": "" if lam is None else lam, "range": str(rng)}
                if alpha is not None:
                    row["contains_alpha"] = alpha in rng
                    if not row["contains_alpha"]:
                        outside.append(f"d={d} {scope}")
                rows.append(row)
    print(_table(rows, args.format or "text"))
    if alpha is not None and args.scope and outside:
        print(f"alpha = {alpha} outside: {', '.join(outside)}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_norms(args) -> int:
    from .dyadic import SpaceTimeField, xtilde_norm
    from .io import load

    record = load(args.run_dir)
    grid = record.grid
    snaps = record.snapshots.get(args.formulation) or next(iter(record.snapshots.values()), None)
    if not snaps:
        print(f"{args.run_dir}: no snapshots stored", file=sys.stderr)
        return EXIT_FAILED
    times = np.array([t for t, _ in snaps])
    values = np.stack([v for _, v in snaps]).astype(complex)
    window = args.window or (times[-1] - times[0]) or 1.0
    edges = np.arange(times[0], times[-1] + window, window)
    rows = []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (times >= a - 1e-12) & (times <= b + 1e-12)
        if sel.sum() < 1:
            continue
        u = SpaceTimeField(grid, times[sel] - times[sel][0], values[sel])
        l2 = np.sqrt(grid.cell_volume * np.sum(np.abs(values[sel]) ** 2, axis=tuple(range(1, grid.d + 1))))
        rows.append({"t_start": float(a), "t_end": float(min(b, times[-1])), "slices": int(sel.sum()),
                     "xtilde": xtilde_norm(u), "linf_l2": float(l2.max())})
    fmt = args.format or "csv"
    text = _table(rows, fmt)
    _emit(text, Path(args.out) if args.out else None, f"norms.{fmt}")
    return EXIT_OK


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="snls", description="Stochastic NLS desk-scale lab.")
    p.add_argument("--version", action="version", version=f"snls {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp, refine_default=0):
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--scenario", help="shipped scenario name (default desk-focusing)")
        sp.add_argument("--seed", type=int, help="override the config seed (u64)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--refine", type=int, default=refine_default,
                        help="halve dt K times (studies: K+1 >= 3 levels ending at the config dt)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("simulate", help="integrate one trajectory and persist it")
    run_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="re-run and check a saved run directory")
    sp.add_argument("run_dir")
    sp.add_argument("--out", help="where report.json and checks.csv go (default: the run directory)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("equivalence", help="direct vs rescaled refinement study")
    run_flags(sp, refine_default=2)
    sp.set_defaults(func=cmd_equivalence)

    sp = sub.add_parser("convergence", help="refinement studies (slopes from >= 3 levels)")
    run_flags(sp, refine_default=2)
    sp.add_argument("--check", action="append", choices=("residual", "equivalence", "rescaled-mass"))
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("picard", help="fixed-point lab: C_hat, tau1, M1, kappa_hat")
    run_flags(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--d", type=int)
    sp.add_argument("--samples", type=int, default=16)
    sp.add_argument("--iterations", type=int, default=6)
    sp.add_argument("--pairs", type=int, default=8, help="trajectory pairs for the contraction estimate")
    sp.set_defaults(func=cmd_picard)

    sp = sub.add_parser("pairs", help="Strichartz pairs used by the fixed-point arguments")
    sp.add_argument("--d", default="1-10", help="dimension, list (1,2,3) or range (1-10)")
    sp.add_argument("--alpha", required=True, help="power, exact (e.g. 3 or 7/3)")
    sp.add_argument("--context")
    sp.add_argument("--format", choices=("text", "csv", "json"))
    sp.set_defaults(func=cmd_pairs)

    sp = sub.add_parser("check-powers", help="admissible power ranges")
    sp.add_argument("--d", default="1-10")
    sp.add_argument("--scope")
    sp.add_argument("--lam", type=int, choices=(1, -1))
    sp.add_argument("--alpha", help="report membership; with --scope, exit 1 when outside")
    sp.add_argument("--format", choices=("text", "csv", "json"))
    sp.set_defaults(func=cmd_check_powers)

    sp = sub.add_parser("norms", help="local smoothing norms per time window of a saved run")
    sp.add_argument("run_dir")
    sp.add_argument("--window", type=float, help="window length (default: whole run)")
    sp.add_argument("--formulation", default="direct")
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"))
    sp.set_defaults(func=cmd_norms)
    return p


def main(argv=None) -> int:
    from .config import ConfigError
    from .io import RecordError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RecordError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
