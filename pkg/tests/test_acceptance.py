"""End-to-end acceptance checks, one test per criterion.

Each test prints ``criterion N: PASS|FAIL ...``; the lines are repeated in
the terminal summary of the pytest run.
"""
import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from cbai import CbaiInstance, Oracle, OracleRng, min_margin, true_optimum
from cbai.algorithms import FLAVORS, SELECT_RULES, run_acol, run_greedy, run_round_based
from cbai.design import (DesignProblem, compute_hclb, grid_oracle_design, min_pulls,
                         round_allocation, solve_minmax_design)
from cbai.driver import (SCENARIO_IDS, THRESHOLD, CarState, load_scenario, penalty_sweep,
                         rollout_batch, step_batch)
from cbai.estimation import ObservationLog, static_bounds
from cbai.harness import (FIG4_PENALTIES, AlgorithmSpec, ExperimentConfig, nearest_rank,
                          run_experiment, run_single, summarize)
from cbai.instances import (InstanceSpec, gen_irrelevant_dimensions, gen_line_1d,
                            gen_orthonormal, gen_unit_sphere, save_instance)

from conftest import base_policy_set, noiseless, report_criterion

SEEDS = 30
THEORY = ["acol", "g-allocation", "uniform", "oracle",
          {"kind": "g-acol", "bounds": "theory", "name": "g-acol-theory"}]
IRR10 = {"family": "irrelevant-dimensions", "d": 10, "eps": 0.05}
SPHERE10 = {"family": "unit-sphere", "d": 10, "n": 20}
# some unit-sphere draws put the optimum within 0.003 of the boundary and need
# more than the default cap of 1e7 queries to certify
UNCAPPED = 10 ** 10


def uncapped(algorithms):
    out = []
    for a in algorithms:
        raw = {"kind": a} if isinstance(a, str) else dict(a)
        out.append(dict(raw, budget=UNCAPPED))
    return out


def run(instance, algorithms, seeds=SEEDS):
    cfg = ExperimentConfig.from_dict({"instance": instance, "algorithms": algorithms, "seeds": seeds})
    return run_experiment(cfg, write=False)


def by_algorithm(rows):
    out = {}
    for r in rows:
        out.setdefault(r.algorithm, []).append(r)
    return out


def median_queries(rows):
    return nearest_rank([r.queries for r in rows], 50)


@pytest.fixture(scope="module")
def irr10_rows():
    return by_algorithm(run(IRR10, uncapped(THEORY) + [{"kind": "g-acol", "name": "g-acol-tuned"}]))


def test_criterion_01_correctness(irr10_rows):
    sphere = by_algorithm(run(SPHERE10, uncapped(THEORY)))
    counts = {}
    for label, groups in (("irr", irr10_rows), ("sphere", sphere)):
        for algo in ("acol", "g-allocation", "uniform", "oracle", "g-acol-theory"):
            counts[f"{label}/{algo}"] = sum(r.correct for r in groups[algo])
    ok = all(c >= 29 for c in counts.values())
    report_criterion(1, ok, " ".join(f"{k}={v}/30" for k, v in counts.items()))
    assert ok


def test_criterion_02_efficiency_ordering():
    med = {}
    for d in (5, 10, 15):
        groups = by_algorithm(run({"family": "irrelevant-dimensions", "d": d, "eps": 0.05},
                                  ["oracle", "acol", "g-allocation", "uniform"]))
        med[d] = {a: median_queries(rs) for a, rs in groups.items()}
    order = all(m["oracle"] <= m["acol"] <= m["g-allocation"] and m["acol"] <= m["uniform"]
                for m in med.values())
    acol = [med[d]["acol"] for d in (5, 10, 15)]
    galloc = [med[d]["g-allocation"] for d in (5, 10, 15)]
    flat = max(acol) < 2 * min(acol)
    increasing = galloc[0] < galloc[1] < galloc[2]
    ok = order and flat and increasing
    report_criterion(2, ok, f"medians {med}; acol spread {max(acol) / min(acol):.2f}x; "
                            f"g-allocation increasing={increasing}")
    assert ok


def test_criterion_03_tight_instance():
    h = compute_hclb(gen_orthonormal(3, 0.5), restricted=False)
    ok = abs(h - 12.0) <= 0.12
    report_criterion(3, ok, f"value {h:.6f} vs 12")
    assert ok


def test_criterion_04_hardness_chain():
    bad = 0
    for seed in range(50):
        inst = gen_unit_sphere(10, 20, seed)
        h = compute_hclb(inst, restricted=True)
        hbar = compute_hclb(inst, restricted=False)
        worst = inst.dim / min_margin(inst) ** 2
        bad += not (h <= hbar * (1 + 1e-3) and hbar <= worst * (1 + 1e-3))
    report_criterion(4, bad == 0, f"{bad} violations over 50 instances")
    assert bad == 0


def test_criterion_05_solver_vs_grid():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 4))
        arms = rng.standard_normal((n, 2))
        targets = np.sort(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
        prob = DesignProblem(arms, targets, rng.uniform(0.2, 2.0, targets.size))
        _, grid = grid_oracle_design(prob, 0.001)
        val = solve_minmax_design(prob).value
        worst = max(worst, abs(val - grid) / grid)
    ok = worst <= 0.02
    report_criterion(5, ok, f"largest relative gap {worst:.2e}")
    assert ok


def test_criterion_06_rounding():
    rng = np.random.default_rng(6)
    eps = 0.1
    bad = 0
    for _ in range(100):
        n_arms = int(rng.integers(2, 8))
        d = int(rng.integers(1, n_arms + 1))
        arms = rng.standard_normal((n_arms, d))
        lam = rng.dirichlet(np.ones(n_arms))
        n = int(rng.integers(min_pulls(n_arms, eps), 2000))
        counts = round_allocation(lam, n, eps).counts
        A_lam = (arms.T * lam) @ arms
        A_n = (arms.T * counts) @ arms
        if counts.sum() != n or np.linalg.matrix_rank(A_lam) < d:
            bad += counts.sum() != n
            continue
        lhs = np.einsum("ij,jk,ik->i", arms, np.linalg.inv(A_n), arms)
        rhs = (1 + eps) / n * np.einsum("ij,jk,ik->i", arms, np.linalg.inv(A_lam), arms)
        bad += int(np.sum(lhs > rhs * (1 + 1e-10)))
    report_criterion(6, bad == 0, f"{bad} violations over 100 pairs")
    assert bad == 0


def test_criterion_07_coverage():
    inst = gen_unit_sphere(5, 10, 7)
    sigma, delta = inst.noise_sigma, 0.05
    w = solve_minmax_design(DesignProblem(inst.arms, np.arange(inst.n_arms))).allocation.weights
    counts = round_allocation(np.where(w < 1e-7, 0, w) / np.where(w < 1e-7, 0, w).sum(), 200, 0.1).counts
    truth = inst.constraint_values()
    oracle = Oracle(inst, OracleRng(7))
    covered = 0
    for _ in range(1000):
        log = ObservationLog(inst.dim).record_counts(inst.arms, counts, oracle.pull_counts(counts))
        b = static_bounds(log, inst.arms, delta, sigma)
        covered += bool(np.all((b.lower <= truth) & (truth <= b.upper)))
    rate = covered / 1000
    report_criterion(7, rate >= 0.93, f"coverage {rate:.3f}")
    assert rate >= 0.93


def test_criterion_08_tuned_gain(irr10_rows):
    theory = median_queries(irr10_rows["g-acol-theory"])
    tuned = median_queries(irr10_rows["g-acol-tuned"])
    correct = sum(r.correct for r in irr10_rows["g-acol-tuned"])
    ok = tuned * 10 <= theory and correct == SEEDS
    report_criterion(8, ok, f"median theory {theory}, tuned {tuned} "
                            f"({theory / tuned:.0f}x), tuned correct {correct}/30")
    assert ok


def test_criterion_09_line():
    inst = gen_line_1d()
    feasible = inst.constraint_values() <= inst.threshold
    groups = by_algorithm(run({"family": "line-1d"}, [
        {"kind": "g-acol", "name": "g-acol"},
        {"kind": "maxrew-u", "name": "maxrew-u"},
        {"kind": "maxrew-f", "name": "maxrew-f", "budget": 100_000},
    ]))
    med = {a: median_queries(rs) for a, rs in groups.items()}
    all_correct = all(r.correct for rs in groups.values() for r in rs)
    never_infeasible = all(r.recommended < 0 or feasible[r.recommended] for r in groups["maxrew-f"])
    ok = med["g-acol"] < med["maxrew-u"] < med["maxrew-f"] and all_correct and never_infeasible
    report_criterion(9, ok, f"medians {med}; all correct {all_correct}; "
                            f"maxrew-f never infeasible {never_infeasible}")
    assert ok


@pytest.mark.slow
def test_criterion_10_driver(tmp_path):
    ps = base_policy_set(0)
    path = tmp_path / "driver.json"
    save_instance(ps.instance, path)
    spec = InstanceSpec("file", {"path": str(path)})
    algo = AlgorithmSpec.from_dict({"kind": "g-acol", "name": "g-acol-tuned-sqrtbeta3",
                                    "beta": 9.0, "noise_scale": None, "budget": 10_000})
    rows = [run_single(spec, algo, s) for s in range(SEEDS)]
    good = sum(r.correct and r.stopped_reason == "certified" for r in rows)
    med = median_queries(rows)
    # theory-level variants at a reduced budget, reported only
    theory = []
    for kind in ("acol", {"kind": "g-acol", "bounds": "theory"}):
        raw = {"kind": kind} if isinstance(kind, str) else dict(kind)
        a = AlgorithmSpec.from_dict(dict(raw, budget=20_000, noise_scale=None))
        rs = [run_single(spec, a, s) for s in range(3)]
        theory.append(f"{a.name}: exhausted {sum(r.stopped_reason != 'certified' for r in rs)}/3")
    ok = good >= 28
    report_criterion(10, ok, f"sqrt(beta)=3: {good}/30 certified correct within 1e4, "
                             f"median {med}, max {max(r.queries for r in rows)}; "
                             f"optimum origin {ps.origin[true_optimum(ps.instance)]}; "
                             + "; ".join(theory))
    assert ok


@pytest.mark.slow
def test_criterion_11_penalty_sweep():
    notes, soft_ok = [], True
    hard_ok = True
    for sid in SCENARIO_IDS:
        rows = penalty_sweep(load_scenario(sid), FIG4_PENALTIES, rng=0)
        base = rows[-1]
        sweep = rows[:-1]
        if sid == "base":
            rho = spearmanr([r.penalty for r in sweep], [r.constraint for r in sweep]).statistic
            hard_ok = rho < 0 and base.constraint <= THRESHOLD
            notes.append(f"base spearman {rho:.3f}, baseline J {base.constraint:.3f}")
        feas = [r for r in sweep if r.constraint <= THRESHOLD]
        if feas:
            first = feas[0]
            worse = first.reward <= base.reward
            soft_ok &= worse
            notes.append(f"{sid}: smallest feasible penalty {first.penalty:g} reward "
                         f"{first.reward:.4f} vs constrained {base.reward:.4f}")
        else:
            notes.append(f"{sid}: no penalized solution feasible")
    report_criterion(11, hard_ok, ("soft check held; " if soft_ok else "soft check inverted; ")
                     + "; ".join(notes))
    assert hard_ok


def test_criterion_12_properties():
    failures = []
    # elimination monotonicity
    inst = gen_irrelevant_dimensions(5, 0.1)
    for seed in range(5):
        for r in (run_acol(inst.view(), Oracle(inst, OracleRng(seed))),
                  run_greedy(inst.view(), Oracle(inst, OracleRng(seed)), trace_every=1)):
            u = np.array([t.n_uncertain for t in r.trace])
            f = np.array([t.n_feasible for t in r.trace])
            if np.any(np.diff(u) > 0) or np.any(np.diff(f) < 0):
                failures.append("monotonicity")
    # noiseless exactness
    fams = [gen_irrelevant_dimensions(5, 0.1), gen_unit_sphere(5, 12, 0), gen_line_1d(),
            gen_orthonormal(3, 0.5)]
    for inst in map(noiseless, fams):
        opt = true_optimum(inst)
        feasible = inst.constraint_values() <= inst.threshold
        S = float(np.linalg.norm(inst.constraint))
        results = [run_acol(inst.view(), Oracle(inst, OracleRng(0)), noise_scale=None)]
        results += [run_round_based(inst, Oracle(inst, OracleRng(0)), fl, noise_scale=None)
                    for fl in FLAVORS]
        for rule in SELECT_RULES:
            for mode in ("tuned", "adaptive"):
                r = run_greedy(inst.view(), Oracle(inst, OracleRng(0)), rule, mode,
                               norm_bound_S=S, noise_scale=None, budget=20_000)
                if rule == "maxrew-feasible" and r.stopped_reason != "certified":
                    if r.recommended is not None and not feasible[r.recommended]:
                        failures.append(f"{inst.name}/{rule}/{mode} infeasible")
                    continue
                results.append(r)
        failures += [inst.name for r in results if r.recommended != opt]
    # dynamics determinism and clipping
    sc = load_scenario("different-environment")
    W = np.random.default_rng(1).normal(0, 3, (50, 40))
    if rollout_batch(W, sc).tobytes() != rollout_batch(W, sc).tobytes():
        failures.append("rollout determinism")
    s = np.random.default_rng(2).uniform(-1, 1, (200, 4))
    for _ in range(20):
        s = step_batch(s, np.random.default_rng(3).normal(0, 10, (200, 2)))
        if np.any(np.abs(s[:, 3]) > 1):
            failures.append("clipping")
    # binary feedback unbiasedness
    for mean in (-0.8, -0.2, 0.0, 0.5, 0.9):
        b = CbaiInstance([[mean], [-1.0]], [1.0], [1.0], 0.95, feedback="binary")
        n = 50_000
        est = Oracle(b, OracleRng(11)).pull_counts([n, 0])[0] / n
        if abs(est - mean) > 3 / math.sqrt(n):
            failures.append(f"binary mean {mean}")
    ok = not failures
    report_criterion(12, ok, "all property checks held" if ok else f"failures: {failures}")
    assert ok
