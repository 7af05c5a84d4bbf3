"""Command-line front end.

    ucblab solve    --deltas 0,0.1 --sigma 1 --T 1000
    ucblab sweep    --preset fig1 --out fig1.csv --plot
    ucblab coverage --preset fig2 --out fig2.csv
    ucblab audit    --preset fig1 --deltas 0.1

Exit status: 0 on success, 1 when an audit finds violations, 2 on usage
errors.  All randomness flows from ``--seed``.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ucblab.bandit import (
    BanditInstance,
    UcbConfig,
    compute_W,
    pseudo_regret,
    simulate_ucb1,
    vanilla_regret,
)
from ucblab.inference import (
    CLT_COLUMNS,
    COVERAGE_COLUMNS,
    clt_statistics,
    coverage_from_stats,
    kolmogorov_distance,
)
from ucblab.linear import LinearModel, linear_clt_mc, linear_preset, population_quantities
from ucblab.montecarlo import (
    CROSSING_COLUMNS,
    PULL_COLUMNS,
    SWEEP_COLUMNS,
    WORKERS_ENV,
    McConfig,
    boundary_crossing_mc,
    regret_sweep,
    sandwich_audit,
    simulate_replicates,
)
from ucblab.oracle import lai_robbins_regret, oracle_solution
from ucblab.svg import render_svg_lineplot
from ucblab.tables import FORMATS, emit_table

COMMANDS = ("solve", "simulate", "sweep", "coverage", "clt", "linear", "audit", "crossing")
PRESETS = ("fig1", "fig2")
DEFAULT_ALPHAS = (0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)


@dataclass
class RunSpec:
    """Fully resolved run configuration, echoed into every output file."""

    command: str
    K: int | None = None
    T: int | None = None
    gamma: float | None = None
    sigma: float | None = None
    deltas: list[float] | None = None
    mu: list[float] | None = None
    reps: int = 1000
    seed: int = 0
    alpha: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=lambda: [0.0])
    x: list[float] = field(default_factory=list)
    out: str | None = None
    format: str = "csv"
    plot: bool = False
    preset: str | None = None
    gamma_literal: bool = False
    workers: int | None = None
    tie_break: str = "lowest_index"

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        return d


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ucblab",
        description="UCB1 fixed-point theory, simulation and inference.",
        epilog=f"Set {WORKERS_ENV} to override the default worker count.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--preset", choices=PRESETS)
    parser.add_argument("--K", type=int)
    parser.add_argument("--T", type=int)
    parser.add_argument("--gamma", type=float, help="exploration rate (default sqrt(2 log T))")
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--deltas", type=_float_list, help="comma-separated gaps")
    parser.add_argument("--mu", type=_float_list, help="comma-separated arm means")
    parser.add_argument("--reps", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--alpha", type=_float_list, help="comma-separated nominal alphas")
    parser.add_argument("--lambda", dest="lam", type=_float_list, help="ridge penalties")
    parser.add_argument("--x", type=_float_list, help="crossing levels")
    parser.add_argument("--out", help="output table path (default: stdout)")
    parser.add_argument("--format", choices=FORMATS, default="csv")
    parser.add_argument("--plot", action="store_true", help="also write an SVG next to --out")
    parser.add_argument(
        "--gamma-literal",
        action="store_true",
        help="fig2: use gamma = sqrt(6 log T / T) instead of sqrt(6 log T)",
    )
    parser.add_argument("--workers", type=int)
    parser.add_argument("--tie-break", choices=("lowest_index", "random"), default="lowest_index")
    return parser


def _apply_preset(ns: argparse.Namespace) -> None:
    def default(name, value):
        if getattr(ns, name) is None:
            setattr(ns, name, value)

    if ns.preset == "fig1":
        default("K", 2)
        default("sigma", 0.1)
        default("T", 3000)
        default("reps", 1000)
        if ns.mu is None:
            default("deltas", [round(0.01 * i, 2) for i in range(1, 26)])
    elif ns.preset == "fig2":
        default("T", 10_000)
        default("sigma", 0.1)
        default("reps", 1000)
        if ns.deltas is None:
            default("mu", [1.0, 1.0 - math.sqrt(math.log(ns.T) / ns.T)])
        if ns.gamma is None:
            scale = 6.0 * math.log(ns.T)
            ns.gamma = math.sqrt(scale / ns.T) if ns.gamma_literal else math.sqrt(scale)


def parse_args(argv: Sequence[str] | None = None) -> RunSpec:
    """Parse and validate command-line arguments (exit status 2 on error)."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    _apply_preset(ns)
    if ns.sigma is None:
        ns.sigma = 0.1
    if ns.reps is None:
        ns.reps = 1000
    if ns.seed is None:
        ns.seed = 0
    if ns.deltas is not None and ns.mu is not None and ns.command != "sweep":
        parser.error("give either --deltas or --mu, not both")
    if ns.command in ("solve", "simulate", "coverage", "clt", "audit"):
        if ns.deltas is None and ns.mu is None:
            parser.error(f"{ns.command} needs --deltas or --mu (or a --preset)")
        n_arms = len(ns.deltas if ns.deltas is not None else ns.mu)
        if ns.command == "audit" and ns.deltas is not None and ns.K is not None:
            n_arms = ns.K
        elif ns.K is not None and ns.K != n_arms:
            parser.error(f"--K {ns.K} does not match the {n_arms} arm values given")
        ns.K = n_arms
    if ns.command == "sweep":
        if ns.deltas is None:
            parser.error("sweep needs --deltas (or --preset fig1)")
        if ns.K is None:
            ns.K = 2
    if ns.deltas is not None and any(d < 0 for d in ns.deltas):
        parser.error("--deltas must be nonnegative")
    if ns.command == "crossing":
        ns.T = ns.T or 1000
        ns.x = ns.x or [1.0, 1.5, 2.0, 2.5, 3.0, 4.0]
        if any(v < 1 for v in ns.x):
            parser.error("--x entries must be >= 1")
    if ns.command == "linear" and ns.T is None:
        ns.T = linear_preset()[1]
    if ns.T is None:
        ns.T = 3000 if ns.command != "solve" else 1000
    if ns.T < 1:
        parser.error("--T must be positive")
    if ns.K is not None and ns.K > ns.T and ns.command != "solve":
        parser.error(f"--T {ns.T} is shorter than the {ns.K} initialization pulls")
    if ns.gamma is None:
        if ns.command == "linear":
            ns.gamma = math.sqrt(6.0 * math.log(ns.T))
        else:
            ns.gamma = math.sqrt(2.0 * math.log(max(ns.T, 2)))
    if ns.gamma <= 0:
        parser.error("--gamma must be positive")
    if ns.sigma < 0:
        parser.error("--sigma must be nonnegative")
    if ns.reps < 1:
        parser.error("--reps must be positive")
    if not 0 <= ns.seed < 2**64:
        parser.error("--seed must be a 64-bit unsigned integer")
    if ns.alpha is None:
        ns.alpha = list(DEFAULT_ALPHAS)
    if any(not 0 < a < 1 for a in ns.alpha):
        parser.error("--alpha entries must lie in (0, 1)")
    if ns.lam is None:
        ns.lam = [0.0, 0.1, 1.0] if ns.command == "linear" else [0.0]
    if any(v < 0 for v in ns.lam):
        parser.error("--lambda entries must be nonnegative")
    if ns.plot and ns.out is None:
        parser.error("--plot needs --out")
    if ns.workers is not None and ns.workers < 1:
        parser.error("--workers must be positive")
    return RunSpec(
        command=ns.command,
        K=ns.K,
        T=ns.T,
        gamma=ns.gamma,
        sigma=ns.sigma,
        deltas=ns.deltas,
        mu=ns.mu,
        reps=ns.reps,
        seed=ns.seed,
        alpha=list(ns.alpha),
        lam=list(ns.lam),
        x=list(ns.x or []),
        out=ns.out,
        format=ns.format,
        plot=ns.plot,
        preset=ns.preset,
        gamma_literal=ns.gamma_literal,
        workers=ns.workers,
        tie_break=ns.tie_break,
    )


def _instance(spec: RunSpec) -> BanditInstance:
    if spec.mu is not None:
        return BanditInstance(spec.mu, spec.sigma)
    if spec.command == "audit" and len(spec.deltas) != spec.K:
        (delta,) = spec.deltas
        return BanditInstance([0.0] + [-delta] * (spec.K - 1), spec.sigma)
    return BanditInstance.from_gaps(spec.deltas, spec.sigma)


def _mc(spec: RunSpec) -> McConfig:
    return McConfig(spec.reps, spec.seed, spec.workers if spec.workers else "auto")


def _svg_path(spec: RunSpec, suffix: str = "") -> Path:
    p = Path(spec.out)
    return p.with_name(p.stem + suffix + ".svg")


def _sibling(spec: RunSpec, suffix: str) -> str | None:
    if spec.out is None:
        return None
    p = Path(spec.out)
    return str(p.with_name(p.stem + suffix + p.suffix))


def _emit(spec: RunSpec, rows, columns, path=None) -> None:
    path = path if path is not None else spec.out
    text = emit_table(rows, columns, spec.format, path, spec.as_dict())
    if path is None:
        sys.stdout.write(text)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_solve(spec: RunSpec) -> int:
    inst = _instance(spec)
    sol = oracle_solution(inst, spec.T, spec.gamma)
    columns = ("arm", "delta", "n_star_a", "n_star", "reg_star", "d_star", "mu_plus", "err_theta", "reg_lr")
    reg_lr = lai_robbins_regret(inst, spec.T) if spec.T >= 2 else math.nan
    rows = [
        {
            "arm": a,
            "delta": float(inst.gaps[a]),
            "n_star_a": float(sol.n_star_a[a]),
            "n_star": sol.n_star,
            "reg_star": sol.reg_star,
            "d_star": sol.d_star,
            "mu_plus": sol.mu_plus,
            "err_theta": sol.budget.err_theta if sol.budget else math.nan,
            "reg_lr": reg_lr,
        }
        for a in range(inst.K)
    ]
    _emit(spec, rows, columns)
    _log(f"n_star={sol.n_star:.12g} reg_star={sol.reg_star:.12g} d_star={sol.d_star:.6g}")
    return 0


def cmd_simulate(spec: RunSpec) -> int:
    inst = _instance(spec)
    traj = simulate_ucb1(inst, UcbConfig(spec.T, spec.gamma, spec.seed, spec.tie_break))
    W = compute_W(traj)
    rows = [
        {
            "arm": a,
            "mu": inst.mu[a],
            "count": int(traj.final_counts[a]),
            "mean": float(traj.means[a]),
            "W": float(W[a]),
        }
        for a in range(inst.K)
    ]
    _emit(spec, rows, ("arm", "mu", "count", "mean", "W"))
    _log(
        f"pseudo_regret={pseudo_regret(inst, traj):.12g} "
        f"vanilla_regret={vanilla_regret(inst, traj):.12g}"
    )
    return 0


def cmd_sweep(spec: RunSpec) -> int:
    pulls: list[dict] = []
    rows = regret_sweep(spec.K, spec.sigma, spec.T, spec.gamma, spec.deltas, _mc(spec), pulls)
    _emit(spec, rows, SWEEP_COLUMNS)
    if spec.out is not None:
        _emit(spec, pulls, PULL_COLUMNS, _sibling(spec, "_pulls"))
    if spec.plot:
        d = [r["delta"] for r in rows]
        render_svg_lineplot(
            [
                list(zip(d, [r["reg_mc_mean"] for r in rows])),
                list(zip(d, [r["reg_star"] for r in rows])),
                list(zip(d, [r["reg_lr"] for r in rows])),
            ],
            ["Monte-Carlo regret", "theoretical regret", "Lai-Robbins"],
            _svg_path(spec),
            title=f"UCB1 regret, T={spec.T}, sigma={spec.sigma:g}",
            xlabel="gap",
            ylabel="regret",
            dashed=[True, False, False],
        )
        series, labels, dashed = [], [], []
        for a in range(spec.K):
            arm_rows = [p for p in pulls if p["arm"] == a and p["delta"] <= 0.05 + 1e-12]
            if not arm_rows:
                continue
            dd = [p["delta"] for p in arm_rows]
            series += [list(zip(dd, [p["n_mc_mean"] for p in arm_rows])),
                       list(zip(dd, [p["n_star"] for p in arm_rows]))]
            labels += [f"arm {a} Monte-Carlo", f"arm {a} theory"]
            dashed += [True, False]
        if series:
            render_svg_lineplot(
                series, labels, _svg_path(spec, "_pulls"),
                title="arm pulls", xlabel="gap", ylabel="pulls", dashed=dashed,
            )
    return 0


def cmd_coverage(spec: RunSpec) -> int:
    inst = _instance(spec)
    stats = simulate_replicates(inst, UcbConfig(spec.T, spec.gamma, 0, spec.tie_break), _mc(spec))
    report = coverage_from_stats(stats, inst, spec.alpha)
    _emit(spec, report.rows(), COVERAGE_COLUMNS)
    if spec.plot:
        nominal = [1.0 - a for a in report.alphas]
        render_svg_lineplot(
            [list(zip(nominal, report.coverage[a])) for a in range(inst.K)],
            [f"arm {a}" for a in range(inst.K)],
            _svg_path(spec),
            title="coverage of normal intervals",
            xlabel="nominal level",
            ylabel="empirical coverage",
            reference_line=True,
        )
    return 0


def cmd_clt(spec: RunSpec) -> int:
    inst = _instance(spec)
    stats = simulate_replicates(inst, UcbConfig(spec.T, spec.gamma, 0, spec.tie_break), _mc(spec))
    z = clt_statistics(stats["means"], stats["counts"], inst.mu, inst.sigma)
    rows = [
        {"replicate": r, "arm": a, "statistic": float(z[r, a])}
        for a in range(inst.K)
        for r in range(z.shape[0])
    ]
    _emit(spec, rows, CLT_COLUMNS)
    for a in range(inst.K):
        _log(f"arm {a}: kolmogorov_distance={kolmogorov_distance(z[:, a]):.6f}")
    if spec.plot:
        grid = np.linspace(-3.5, 3.5, 71)
        series = [list(zip(grid, np.mean(z[:, a][:, None] <= grid, axis=0))) for a in range(inst.K)]
        from scipy.special import ndtr

        series.append(list(zip(grid, ndtr(grid))))
        render_svg_lineplot(
            series,
            [f"arm {a} empirical CDF" for a in range(inst.K)] + ["N(0,1)"],
            _svg_path(spec),
            title="normalized sample means",
            xlabel="statistic",
            ylabel="CDF",
        )
    return 0


def cmd_linear(spec: RunSpec) -> int:
    model, _, _ = linear_preset()
    if spec.sigma != 0.1:
        model = LinearModel(model.Z, model.beta_star, spec.sigma)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    w = rng.standard_normal(model.d)
    w /= np.linalg.norm(w)
    out = linear_clt_mc(
        model, UcbConfig(spec.T, spec.gamma, 0, spec.tie_break), _mc(spec), w, spec.lam
    )
    stat = out["statistic"]
    rows = [
        {"replicate": r, "lambda": lam, "statistic": float(stat[r, j])}
        for j, lam in enumerate(spec.lam)
        for r in range(stat.shape[0])
    ]
    _emit(spec, rows, ("replicate", "lambda", "statistic"))
    pop = population_quantities(model, spec.T, spec.gamma)
    x = stat[:, 0]
    _log(
        f"w={np.array2string(w, precision=4)} mean={x.mean():.4f} var={x.var(ddof=1):.4f} "
        f"kolmogorov_distance={kolmogorov_distance(x):.4f} "
        f"z_K={pop.z_K:.4g} sigma_star={pop.sigma_star:.4g}"
    )
    return 0


def cmd_audit(spec: RunSpec) -> int:
    inst = _instance(spec)
    audit = sandwich_audit(inst, UcbConfig(spec.T, spec.gamma, 0, spec.tie_break), _mc(spec))
    row = {
        "reps": spec.reps,
        "events_held": audit.events_held,
        "sandwich_held": audit.sandwich_held,
        "not_detected": audit.not_detected,
        "e0_count": audit.e0_count,
        "upper_checked": audit.upper_checked,
        "lower_checked": audit.lower_checked,
        "violations": len(audit.violations),
    }
    _emit(spec, [row], tuple(row))
    for r, seed, arm, side in audit.violations:
        _log(f"violation: replicate={r} seed={seed} arm={arm} side={side}")
    return 0 if audit.ok else 1


def cmd_crossing(spec: RunSpec) -> int:
    rows = boundary_crossing_mc(spec.T, spec.x, _mc(spec))
    _emit(spec, rows, CROSSING_COLUMNS)
    return 0


HANDLERS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "coverage": cmd_coverage,
    "clt": cmd_clt,
    "linear": cmd_linear,
    "audit": cmd_audit,
    "crossing": cmd_crossing,
}


def main(argv: Sequence[str] | None = None) -> int:
    spec = parse_args(argv)
    try:
        return HANDLERS[spec.command](spec)
    except (ValueError, OSError) as exc:
        print(f"ucblab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
