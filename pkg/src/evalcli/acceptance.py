import filecmp
import math
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from scipy.integrate import dblquad
from scipy.stats import spearmanr

from src.common.decorators import monitor_run
from src.common.logger import setup_logger
from src.evalcli.schemas import Cell, CellStats, SweepSpec
from src.evalcli.service import (
    EPISODES_FILE,
    cell_run_config,
    is_finite,
    load_cell_stats,
    load_episode_rows,
    run_sweep,
    sweep_run_config,
)
from src.geometry.service import build_path
from src.idm.schemas import IdmParams
from src.idm.service import idm_accel
from src.profiles.schemas import PredictionConfig
from src.profiles.service import constant_profile, rollout
from src.risk.schemas import RiskParams, UncertaintyEllipse
from src.risk.service import collision_probability, damage, evaluate_risk
from src.ropt.optimizer import nelder_mead
from src.sim.schemas import PlannerKind, RunConfig
from src.sim.service import simulate_episode

logger = setup_logger(__name__)

CRASH_SEQUENCE = ["merge_decision", "curve_limited", "safety_brake", "stopped_in_conflict_zone", "crash"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _cells(stats: List[CellStats], planner: PlannerKind) -> List[CellStats]:
    return [s for s in stats if s.planner is planner]


def check_ropt_safety(stats: List[CellStats]) -> CheckResult:
    cells = _cells(stats, PlannerKind.ROPT)
    crash = max((s.crash_rate for s in cells), default=0.0)
    lower = min((s.d_back_lower for s in cells if s.d_back_lower is not None), default=math.inf)
    passed = bool(cells) and crash == 0.0 and lower >= 10.0
    return CheckResult("ropt_safety_floor", passed, f"max crash rate {crash:.3f}, d_back lower bound {lower:.2f} m")


def check_iidm_failure(stats: List[CellStats], episodes_csv: FilePath, run: RunConfig) -> CheckResult:
    cells = [s for s in _cells(stats, PlannerKind.IIDM) if s.lam == 2.0 and s.param in (0.5, 1.0)]
    if not cells:
        return CheckResult("iidm_failure_mechanism", False, "no IIDM cells at λ = 2 s, p in {0.5, 1}")
    rate = sum(s.crash_rate * s.runs for s in cells) / sum(s.runs for s in cells)

    crashes = [
        r for r in load_episode_rows(episodes_csv)
        if r.planner is PlannerKind.IIDM and r.lam == 2.0 and r.param in (0.5, 1.0) and r.crash
    ]
    mechanism = False
    for record in crashes:
        cell_run = cell_run_config(run, Cell(planner=record.planner, lam=record.lam, param=record.param))
        _, trace = simulate_episode(cell_run, PlannerKind.IIDM, record.seed)
        if trace.has_sequence(CRASH_SEQUENCE):
            mechanism = True
            break
    passed = 0.05 <= rate <= 0.8 and mechanism
    return CheckResult("iidm_failure_mechanism", passed,
                       f"crash rate {rate:.3f}, crash sequence reproduced: {mechanism}")


def check_predictive_safety(stats: List[CellStats]) -> CheckResult:
    cells = _cells(stats, PlannerKind.PREDICTIVE_IIDM)
    crash = max((s.crash_rate for s in cells), default=0.0)
    bounds = [s.d_back_lower for s in cells if s.param == 0.5 and s.d_back_lower is not None]
    lower = min(bounds, default=math.nan)
    passed = bool(cells) and crash == 0.0 and 8.0 <= lower <= 20.0
    return CheckResult("predictive_iidm_safety", passed,
                       f"max crash rate {crash:.3f}, d_back lower bound at p=0.5 {lower:.2f} m")


def check_gap_realism(stats: List[CellStats]) -> CheckResult:
    gaps = [s.t_gap_mean for s in stats if is_finite(s.t_gap_mean)]
    passed = bool(gaps) and all(3.0 <= g <= 9.0 for g in gaps)
    span = f"[{min(gaps):.2f}, {max(gaps):.2f}] s" if gaps else "no merges"
    return CheckResult("gap_realism", passed, f"mean taken gaps {span}")


def _trend(cells: List[CellStats], axis: Callable[[CellStats], float],
           metric: Callable[[CellStats], Optional[float]]) -> float:
    points = [(axis(s), metric(s)) for s in cells if is_finite(metric(s))]
    if len({p[0] for p in points}) < 3:
        return math.nan
    rho = spearmanr([p[0] for p in points], [p[1] for p in points]).correlation
    return float(rho)


def check_trends(stats: List[CellStats]) -> CheckResult:
    """Spearman signs of the cell means; a constant series is no violation."""
    expectations = []
    for planner in PlannerKind:
        cells = _cells(stats, planner)
        expectations.append((f"{planner.value} d_back vs λ", _trend(cells, lambda s: s.lam, lambda s: s.d_back_mean), 1))
        sign = -1 if planner is PlannerKind.ROPT else 1
        name = "b^t" if planner is PlannerKind.ROPT else "p"
        expectations.append((f"{planner.value} d_back vs {name}",
                             _trend(cells, lambda s: s.param, lambda s: s.d_back_mean), sign))
        expectations.append((f"{planner.value} n_gap vs {name}",
                             _trend(cells, lambda s: s.param, lambda s: s.n_gap_mean), sign))
    failed = [name for name, rho, sign in expectations if not math.isnan(rho) and rho * sign < 0]
    return CheckResult("monotone_trends", not failed, "violations: " + (", ".join(failed) or "none"))


def _scripted_risk(ego, other, params: RiskParams) -> float:
    """Step-by-step loop over the risk integral, kept apart from the vectorised code."""
    total, exposure = 0.0, 0.0
    for k in range(ego.steps):
        e1 = UncertaintyEllipse((ego.x[k], ego.y[k]), ego.sigma_lon[k], ego.sigma_lat[k], ego.heading[k])
        e2 = UncertaintyEllipse((other.x[k], other.y[k]), other.sigma_lon[k], other.sigma_lat[k], other.heading[k])
        p_coll = collision_probability(e1, e2)
        a_y = ego.curvature[k] * ego.velocity[k] ** 2
        margin = max(params.a_y_max - abs(a_y), 0.0)
        p_curv = min(math.exp(-margin ** 2 / (2 * params.sigma_curve ** 2))
                     / math.sqrt(2 * math.pi * params.sigma_curve ** 2), 1.0)
        rel = math.hypot(other.velocity[k] * math.cos(other.heading[k]) - ego.velocity[k] * math.cos(ego.heading[k]),
                         other.velocity[k] * math.sin(other.heading[k]) - ego.velocity[k] * math.sin(ego.heading[k]))
        rate_coll, rate_curv = p_coll / ego.dt, p_curv / ego.dt
        exposure += (params.escape_rate + rate_coll + rate_curv) * ego.dt
        survival = math.exp(-exposure)
        total += (rate_coll * damage("coll", rel, params) + rate_curv * damage("curv", ego.velocity[k], params)) \
            * survival * ego.dt
    return total


def check_risk_math(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    notes, passed = [], True

    # Gaussian product against quadrature
    worst = 0.0
    for _ in range(100):
        sig = np.sort(rng.uniform(0.5, 2.0, size=(2, 2)), axis=1)[:, ::-1]
        e1 = UncertaintyEllipse((0.0, 0.0), sig[0, 0], sig[0, 1], rng.uniform(-np.pi, np.pi))
        e2 = UncertaintyEllipse(tuple(rng.uniform(-1.0, 1.0, 2)), sig[1, 0], sig[1, 1], rng.uniform(-np.pi, np.pi))
        closed = collision_probability(e1, e2)
        numeric = _product_quadrature(e1, e2)
        worst = max(worst, abs(closed - numeric) / max(numeric, 1e-300))
    passed &= worst <= 1e-6
    notes.append(f"quadrature rel. error {worst:.2e}")

    # survival monotonicity
    monotone = all(np.all(np.diff(np.exp(-np.cumsum(rng.uniform(0, 2, 40) * 0.25))) <= 0) for _ in range(100))
    passed &= monotone
    notes.append(f"survival monotone {monotone}")

    # IDM equilibrium gap
    idm = IdmParams(v_c=15.0)
    gap = (idm.d_0 + 10.0 * idm.T) / math.sqrt(1 - (10.0 / idm.v_c) ** idm.delta)
    equilibrium = abs(idm_accel(10.0, 10.0, gap, idm))
    passed &= equilibrium <= 1e-6
    notes.append(f"IDM equilibrium accel {equilibrium:.1e}")

    # Rosenbrock
    result = nelder_mead(lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2, [-1.2, 1.0],
                         max_iterations=2000, tolerance=1e-8, initial_step=0.5)
    passed &= result.fun < 1e-4
    notes.append(f"Rosenbrock f* {result.fun:.1e}")

    # vectorised risk against the scripted loop
    road = build_path([(-100.0, 0.0), (0.0, 0.0), (200.0, 0.0)], name="road")
    config = PredictionConfig()
    params = RiskParams()
    trace_error = 0.0
    for scene in range(10):
        ego = rollout(constant_profile(8.0 + scene * 0.3), road, 100.0, config)
        other = rollout(constant_profile(8.0), road, 100.0 - 5.0 - scene, config)
        vectorised = evaluate_risk(ego, [other], params).risk
        scripted = _scripted_risk(ego, other, params)
        trace_error = max(trace_error, abs(vectorised - scripted) / max(abs(scripted), 1e-12))
    passed &= trace_error <= 1e-9
    notes.append(f"risk trace rel. error {trace_error:.1e}")

    return CheckResult("risk_math_oracles", bool(passed), "; ".join(notes))


def _product_quadrature(e1: UncertaintyEllipse, e2: UncertaintyEllipse) -> float:
    inv1, inv2 = np.linalg.inv(e1.covariance), np.linalg.inv(e2.covariance)
    n1 = 1 / (2 * np.pi * np.sqrt(np.linalg.det(e1.covariance)))
    n2 = 1 / (2 * np.pi * np.sqrt(np.linalg.det(e2.covariance)))
    m1, m2 = np.asarray(e1.mean), np.asarray(e2.mean)

    def integrand(y, x):
        p = np.array([x, y])
        d1, d2 = p - m1, p - m2
        return n1 * n2 * np.exp(-0.5 * d1 @ inv1 @ d1 - 0.5 * d2 @ inv2 @ d2)

    bound = 12.0
    value, _ = dblquad(integrand, -bound, bound, -bound, bound, epsabs=1e-14, epsrel=1e-10)
    return value


def check_determinism(out_dir: FilePath, workers: Optional[int] = None) -> CheckResult:
    spec = SweepSpec(planners=[PlannerKind.IIDM], lambdas=[3.0], p_values=[0.5], runs=3, base_seed=7)
    first = run_sweep(spec, out_dir / "determinism_a", workers=workers)
    second = run_sweep(spec, out_dir / "determinism_b", workers=workers)
    same = filecmp.cmp(first.files["episodes"], second.files["episodes"], shallow=False)
    return CheckResult("determinism", same, "episode CSVs identical" if same else "episode CSVs differ")


@monitor_run
def run_checks(out_dir: Union[str, FilePath], runs: Optional[int] = None,
               workers: Optional[int] = None, base_seed: int = 0) -> List[CheckResult]:
    """Desk-scale acceptance suite; one result per criterion."""
    out_dir = FilePath(out_dir)
    spec = SweepSpec.from_profile("desk", runs=runs, base_seed=base_seed)
    summary = run_sweep(spec, out_dir / "desk", workers=workers)

    stats = load_cell_stats(summary.files["cells"])
    results = [
        check_ropt_safety(stats),
        check_iidm_failure(stats, summary.out_dir / EPISODES_FILE, sweep_run_config(RunConfig(), spec)),
        check_predictive_safety(stats),
        check_gap_realism(stats),
        check_trends(stats),
        check_risk_math(),
        check_determinism(out_dir, workers),
    ]
    for result in results:
        logger.info(
            f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}",
            extra={"event": "acceptance", "status": "success" if result.passed else "failed"},
        )
    return results


def summarize(results: List[CheckResult]) -> Dict[str, bool]:
    return {r.name: r.passed for r in results}
