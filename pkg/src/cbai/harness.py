"""Configuration-driven experiment runner, summaries and hardness diagnostics."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .algorithms import run_acol, run_greedy, run_round_based
from .algorithms.round_based import DEFAULT_BUDGET
from .core import CbaiInstance, min_margin, superlevel_arms, true_optimum
from .design import compute_hclb
from .instances import InstanceSpec, build_instance, save_instance
from .oracle import Oracle, OracleRng

__all__ = [
    "ConfigError",
    "DiagnosticsError",
    "ALGORITHM_KINDS",
    "AlgorithmSpec",
    "ExperimentConfig",
    "ResultRow",
    "SummaryRow",
    "Diagnostics",
    "load_config",
    "run_single",
    "run_experiment",
    "write_rows",
    "rows_to_csv",
    "read_rows",
    "nearest_rank",
    "summarize",
    "write_summary",
    "diagnostics",
    "PRESETS",
    "run_preset",
]

THREADS_ENV = "CBAI_THREADS"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


class DiagnosticsError(RuntimeError):
    """The hardness quantities violate their ordering beyond solver tolerance."""


# kind -> (family, selection rule or flavor)
ALGORITHM_KINDS = {
    "acol": ("acol", None),
    "oracle": ("round", "oracle-design"),
    "g-allocation": ("round", "g-allocation"),
    "uniform": ("round", "uniform"),
    "g-acol": ("greedy", "maxvar-uncertain"),
    "g-acol-uniform": ("greedy", "uniform-uncertain"),
    "greedy-maxvar": ("greedy", "maxvar-all"),
    "adaptive-uniform": ("greedy", "uniform-all"),
    "maxrew-u": ("greedy", "maxrew-uncertain"),
    "maxrew-f": ("greedy", "maxrew-feasible"),
}

_ALGO_KEYS = {"name", "kind", "delta", "epsilon", "v", "beta", "ridge", "S", "L", "budget",
              "bounds", "noise_scale"}
_CONFIG_KEYS = {"instance", "instances", "algorithms", "seeds", "output", "parallelism", "delta"}


def _field_error(where: str, msg: str) -> ConfigError:
    return ConfigError(f"{where}: {msg}")


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm entry of a configuration.

    ``bounds`` is ``"theory"`` or ``"tuned"`` for the greedy kinds.  A
    ``noise_scale`` of ``None`` uses the instance's noise level (1 for binary
    feedback); the default 1 treats the noise as 1-sub-Gaussian.
    """

    name: str
    kind: str
    delta: float = 0.05
    epsilon: float = 0.1
    v: float = 1.9
    beta: float = 0.25
    ridge: float | None = None
    S: float | None = None
    L: float | None = None
    budget: int = DEFAULT_BUDGET
    bounds: str = "tuned"
    noise_scale: float | None = 1.0

    @classmethod
    def from_dict(cls, raw: dict, where: str = "algorithm", default_delta: float = 0.05):
        if isinstance(raw, str):
            raw = {"kind": raw}
        if not isinstance(raw, dict):
            raise _field_error(where, "must be an object or a kind name")
        unknown = set(raw) - _ALGO_KEYS
        if unknown:
            raise _field_error(where, f"unknown keys {sorted(unknown)}")
        kind = raw.get("kind")
        if kind not in ALGORITHM_KINDS:
            raise _field_error(f"{where}.kind", f"expected one of {sorted(ALGORITHM_KINDS)}, got {kind!r}")
        family = ALGORITHM_KINDS[kind][0]
        bounds = raw.get("bounds", "tuned")
        if bounds not in ("theory", "tuned"):
            raise _field_error(f"{where}.bounds", f"expected 'theory' or 'tuned', got {bounds!r}")
        name = raw.get("name") or (f"{kind}-{bounds}" if family == "greedy" else kind)
        vals: dict[str, Any] = {"name": str(name), "kind": kind, "bounds": bounds}

        def num(key, default, ok, msg, cast=float):
            v = raw.get(key, default)
            if v is None:
                return None
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise _field_error(f"{where}.{key}", f"must be a number, got {v!r}")
            v = cast(v)
            if not ok(v):
                raise _field_error(f"{where}.{key}", msg)
            return v

        vals["delta"] = num("delta", default_delta, lambda x: 0 < x < 1, "must lie in (0, 1)")
        vals["epsilon"] = num("epsilon", 0.1, lambda x: x > 0, "must be positive")
        vals["v"] = num("v", 1.9, lambda x: 1 < x < 2, "must lie in (1, 2)")
        vals["beta"] = num("beta", 0.25, lambda x: x > 0, "must be positive")
        vals["ridge"] = num("ridge", None, lambda x: x > 0, "must be positive")
        vals["S"] = num("S", None, lambda x: x > 0, "must be positive")
        vals["L"] = num("L", None, lambda x: x > 0, "must be positive")
        vals["budget"] = num("budget", DEFAULT_BUDGET, lambda x: x >= 1, "must be at least 1", int)
        vals["noise_scale"] = num("noise_scale", 1.0, lambda x: x > 0, "must be positive")
        return cls(**vals)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ExperimentConfig:
    """Instances x algorithms x seeds, plus where to write the rows."""

    instances: tuple
    algorithms: tuple
    seeds: tuple
    output: str | None = None
    parallelism: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be an object")
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"config: unknown keys {sorted(unknown)}")
        if "instance" in raw and "instances" in raw:
            raise ConfigError("config: give either 'instance' or 'instances'")
        inst_raw = raw.get("instances", [raw["instance"]] if "instance" in raw else None)
        if not inst_raw:
            raise ConfigError("instances: at least one instance spec is required")
        instances = []
        for i, spec in enumerate(inst_raw):
            try:
                instances.append(InstanceSpec.from_dict(spec))
            except (ValueError, TypeError, AttributeError) as exc:
                raise _field_error(f"instances[{i}]", str(exc)) from None
        delta = raw.get("delta", 0.05)
        if isinstance(delta, bool) or not isinstance(delta, (int, float)) or not 0 < delta < 1:
            raise _field_error("delta", f"must lie in (0, 1), got {delta!r}")
        algos_raw = raw.get("algorithms")
        if not isinstance(algos_raw, list) or not algos_raw:
            raise ConfigError("algorithms: a nonempty list is required")
        algos = tuple(AlgorithmSpec.from_dict(a, f"algorithms[{i}]", float(delta))
                      for i, a in enumerate(algos_raw))
        names = [a.name for a in algos]
        if len(set(names)) != len(names):
            raise ConfigError(f"algorithms: names must be unique, got {names}")
        seeds = raw.get("seeds")
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            seeds = list(range(seeds))
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("seeds: a nonempty list of integers (or a count) is required")
        if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
            raise ConfigError("seeds: entries must be nonnegative integers")
        par = raw.get("parallelism", 1)
        if isinstance(par, bool) or not isinstance(par, int) or par < 1:
            raise _field_error("parallelism", f"must be a positive integer, got {par!r}")
        output = raw.get("output")
        if output is not None and not isinstance(output, str):
            raise _field_error("output", "must be a path string")
        return cls(tuple(instances), algos, tuple(seeds), output, par)


def load_config(path) -> ExperimentConfig:
    """Parse a JSON configuration file.

    Raises
    ------
    ConfigError
        Unreadable file, malformed JSON or invalid fields.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(raw)


class ResultRow(NamedTuple):
    instance: str
    instance_params: str
    algorithm: str
    seed: int
    queries: int
    correct: bool
    recommended: int
    stopped_reason: str
    wall_time: float


CSV_COLUMNS = ("instance", "instance_params", "algorithm", "seed", "queries", "correct",
               "recommended", "stopped_reason")


def _stream_id(algorithm: str, instance: str) -> int:
    return (zlib.crc32(algorithm.encode()) << 32) | zlib.crc32(instance.encode())


def _dispatch(inst: CbaiInstance, algo: AlgorithmSpec, oracle: Oracle, rng: np.random.Generator):
    family, rule = ALGORITHM_KINDS[algo.kind]
    view = inst.view()
    common = dict(delta=algo.delta, budget=algo.budget, noise_scale=algo.noise_scale)
    if family == "acol":
        return run_acol(view, oracle, epsilon=algo.epsilon, **common)
    if family == "round":
        source = inst if rule == "oracle-design" else view
        return run_round_based(source, oracle, rule, v=algo.v, epsilon=algo.epsilon, **common)
    if algo.bounds == "theory":
        S = algo.S if algo.S is not None else float(np.linalg.norm(inst.constraint))
        L = algo.L if algo.L is not None else float(np.linalg.norm(inst.arms, axis=1).max())
        return run_greedy(view, oracle, select=rule, bounds_mode="adaptive", norm_bound_S=S,
                          arm_bound_L=L, ridge=algo.ridge, rng=rng, **common)
    return run_greedy(view, oracle, select=rule, bounds_mode="tuned", beta=algo.beta,
                      ridge=algo.ridge, rng=rng, **common)


def run_single(spec: InstanceSpec, algo: AlgorithmSpec, seed: int) -> ResultRow:
    """Run one algorithm on one (possibly seed-dependent) instance."""
    inst = build_instance(spec, seed)
    label = spec.label()
    orng = OracleRng(seed, _stream_id(algo.name, label))
    oracle = Oracle(inst, orng)
    t0 = time.perf_counter()
    res = _dispatch(inst, algo, oracle, orng.child(0))
    wall = time.perf_counter() - t0
    rec = -1 if res.recommended is None else int(res.recommended)
    params = json.dumps(spec.parameters, sort_keys=True)
    return ResultRow(label, params, algo.name, int(seed), int(res.queries),
                     rec == true_optimum(inst), rec, res.stopped_reason, wall)


def _run_task(args):
    return run_single(*args)


def _workers(config: ExperimentConfig, workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}: must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{THREADS_ENV}: must be a positive integer, got {env!r}")
        return n
    return config.parallelism


def run_experiment(config: ExperimentConfig, workers: int | None = None,
                   write: bool = True) -> list:
    """All (instance, algorithm, seed) runs, sorted by that key.

    Parallelism is ``workers`` if given, else the ``CBAI_THREADS``
    environment variable, else the config's ``parallelism``.  Rows are
    written to ``config.output`` when it is set and ``write`` is true.
    """
    tasks = [(spec, algo, seed) for spec in config.instances for algo in config.algorithms
             for seed in config.seeds]
    n = _workers(config, workers)
    if n > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        rows = [_run_task(t) for t in tasks]
    rows.sort(key=lambda r: (r.instance, r.algorithm, r.seed))
    if write and config.output:
        write_rows(rows, config.output)
    return rows


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def rows_to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in columns])
    return buf.getvalue()


def write_rows(rows, path) -> None:
    """Write the result CSV plus a ``<stem>.timing.csv`` sidecar with wall times.

    Wall times live in the sidecar so the main file is reproducible byte for
    byte.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows))
    timing = path.with_name(path.stem + ".timing.csv")
    timing.write_text(rows_to_csv(rows, ("instance", "algorithm", "seed", "wall_time")))


def read_rows(path) -> list:
    """Rows of a result CSV (wall time is not stored there and reads as nan)."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(ResultRow(rec["instance"], rec["instance_params"], rec["algorithm"],
                                 int(rec["seed"]), int(rec["queries"]), rec["correct"] == "true",
                                 int(rec["recommended"]), rec["stopped_reason"], float("nan")))
    return out


def nearest_rank(values, q: float):
    """Nearest-rank percentile: the ``ceil(q/100 * n)``-th smallest value."""
    v = np.sort(np.asarray(values).ravel())
    if v.size == 0:
        raise ValueError("percentile of an empty sample")
    if not 0 <= q <= 100:
        raise ValueError("percentile must lie in [0, 100]")
    k = max(1, math.ceil(q / 100.0 * v.size))
    return v[k - 1]


class SummaryRow(NamedTuple):
    instance: str
    algorithm: str
    runs: int
    median: float
    p25: float
    p75: float
    correct_rate: float
    exhausted: int


def summarize(rows) -> list:
    """Per (instance, algorithm): nearest-rank median and quartiles of the query counts.

    ``exhausted`` counts runs that hit their budget before certifying.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("cannot summarize an empty set of rows")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.instance, r.algorithm), []).append(r)
    out = []
    for (inst, algo), rs in sorted(groups.items()):
        q = np.array([r.queries for r in rs])
        out.append(SummaryRow(
            inst, algo, len(rs),
            float(nearest_rank(q, 50)), float(nearest_rank(q, 25)), float(nearest_rank(q, 75)),
            float(np.mean([r.correct for r in rs])),
            sum(r.stopped_reason != "certified" for r in rs),
        ))
    return out


def write_summary(summary, path, extra: dict | None = None) -> None:
    """Summary CSV; ``extra`` maps column name to a value per summary row."""
    extra = extra or {}
    cols = tuple(extra) + SummaryRow._fields
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i, s in enumerate(summary):
        w.writerow([_fmt(extra[c][i]) for c in extra] + [_fmt(getattr(s, c)) for c in SummaryRow._fields])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue())


class Diagnostics(NamedTuple):
    """Hardness quantities; ``hclb <= hclb_all <= worst_case`` up to solver tolerance."""

    hclb: float
    hclb_all: float
    worst_case: float
    min_margin: float
    n_superlevel: int


def diagnostics(instance: CbaiInstance, rtol: float = 1e-3, tolerance: float = 1e-4) -> Diagnostics:
    """Design-based hardness over the superlevel arms and over all arms, and ``d / C_min^2``.

    Raises
    ------
    ValueError
        An arm lies on the constraint boundary.
    DiagnosticsError
        The three values are out of order by more than ``rtol`` relative.
    """
    c = min_margin(instance)
    if c == 0:
        raise ValueError("an arm lies exactly on the constraint boundary")
    h = compute_hclb(instance, restricted=True, tolerance=tolerance)
    h_all = compute_hclb(instance, restricted=False, tolerance=tolerance)
    worst = instance.dim / c ** 2
    if h > h_all * (1 + rtol) or h_all > worst * (1 + rtol):
        raise DiagnosticsError(f"hardness chain violated: {h} <= {h_all} <= {worst} fails")
    n_sup = int(superlevel_arms(instance, true_optimum(instance)).size)
    return Diagnostics(float(h), float(h_all), float(worst), float(c), n_sup)


# ---------------------------------------------------------------------------
# presets: desk-scale versions of the standard sweeps

THEORY_ALGOS = ("acol", "oracle", "g-allocation", "uniform",
                {"kind": "g-acol", "bounds": "theory", "name": "g-acol-theory"})
TUNED_ALGOS = ({"kind": "g-acol", "name": "g-acol-tuned"},
               {"kind": "greedy-maxvar", "name": "greedy-maxvar-tuned"},
               {"kind": "adaptive-uniform", "name": "adaptive-uniform-tuned"},
               {"kind": "maxrew-u", "name": "maxrew-u-tuned"})
DRIVER_SQRT_BETAS = (1.0, 2.0, 3.0, 4.0)
DRIVER_THEORY_BUDGET = 20_000
MAXREW_F_BUDGET = 100_000
FIG4_PENALTIES = (0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0, 1000.0)


def _sweep(param: str, values, make_instance, algos, seeds):
    return [(param, v, ExperimentConfig((make_instance(v),),
                                        tuple(AlgorithmSpec.from_dict(a, "preset") for a in algos),
                                        tuple(seeds)))
            for v in values]


def _preset_fig2a(seeds):
    algos = THEORY_ALGOS + TUNED_ALGOS
    return (_sweep("d", (5, 10, 15), lambda d: InstanceSpec("irrelevant-dimensions", {"d": d, "eps": 0.05}),
                   algos, seeds)
            + _sweep("eps", (0.05, 0.1, 0.2), lambda e: InstanceSpec("irrelevant-dimensions", {"d": 10, "eps": e}),
                     algos, seeds))


def _preset_fig2b(seeds):
    algos = THEORY_ALGOS + TUNED_ALGOS
    return (_sweep("n", (10, 20, 30), lambda n: InstanceSpec("unit-sphere", {"d": 10, "n": n}), algos, seeds)
            + _sweep("d", (5, 10, 15), lambda d: InstanceSpec("unit-sphere", {"d": d, "n": 20}), algos, seeds))


def _preset_fig3(seeds):
    algos = ({"kind": "g-acol", "name": "g-acol-tuned"},
             {"kind": "maxrew-u", "name": "maxrew-u-tuned"},
             {"kind": "maxrew-f", "name": "maxrew-f-tuned", "budget": MAXREW_F_BUDGET})
    return _sweep("instance", ("line-1d",), lambda _: InstanceSpec("line-1d", {}), algos, seeds)


def _preset_fig5(seeds, out_dir: Path, k: int = 100, set_seed: int = 0):
    from .driver import build_policy_set, load_scenario
    path = out_dir / f"driver-base-k{k}.json"
    if not path.exists():
        save_instance(build_policy_set(load_scenario("base"), k, set_seed), path)
    spec = InstanceSpec("file", {"path": str(path)})
    theory = ({"kind": "acol"}, {"kind": "g-allocation"}, {"kind": "uniform"},
              {"kind": "g-acol", "bounds": "theory", "name": "g-acol-theory"})
    theory = tuple(dict(a, budget=DRIVER_THEORY_BUDGET, noise_scale=None) for a in theory)
    configs = [("sqrt_beta", "theory", ExperimentConfig(
        (spec,), tuple(AlgorithmSpec.from_dict(a, "preset") for a in theory), tuple(seeds)))]
    for sb in DRIVER_SQRT_BETAS:
        algos = tuple(AlgorithmSpec.from_dict({"kind": kind, "name": f"{kind}-tuned-sqrtbeta{sb:g}",
                                               "beta": sb * sb, "noise_scale": None}, "preset")
                      for kind in ("g-acol", "greedy-maxvar", "adaptive-uniform", "maxrew-u"))
        configs.append(("sqrt_beta", sb, ExperimentConfig((spec,), algos, tuple(seeds))))
    return configs


PRESETS = ("fig2a", "fig2b", "fig3", "fig4", "fig5")


def _fig4(out_dir: Path, seed: int):
    from .driver import SCENARIO_IDS, load_scenario, penalty_sweep
    lines = ["scenario,penalty,reward,constraint,objective"]
    for sid in SCENARIO_IDS:
        for r in penalty_sweep(load_scenario(sid), FIG4_PENALTIES, rng=seed):
            lines.append(",".join([sid, _fmt(r.penalty), _fmt(r.reward), _fmt(r.constraint), r.objective]))
    (out_dir / "fig4.csv").write_text("\n".join(lines) + "\n")


def run_preset(name: str, out_dir, seeds=None, workers: int | None = None) -> Path:
    """Run a named sweep and write ``<name>_rows.csv`` and ``<name>_summary.csv``.

    ``fig4`` writes ``fig4.csv`` with one row per penalty and scenario plus
    the constrained baseline (``penalty = nan``).
    """
    if name not in PRESETS:
        raise ConfigError(f"preset: expected one of {PRESETS}, got {name!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if name == "fig4":
        _fig4(out_dir, 0 if seeds is None else int(list(seeds)[0]))
        return out_dir / "fig4.csv"
    seeds = tuple(range(5)) if seeds is None else tuple(seeds)
    if name == "fig2a":
        configs = _preset_fig2a(seeds)
    elif name == "fig2b":
        configs = _preset_fig2b(seeds)
    elif name == "fig3":
        configs = _preset_fig3(seeds)
    else:
        configs = _preset_fig5(seeds, out_dir)
    all_rows, summaries, params, values = [], [], [], []
    for param, value, cfg in configs:
        rows = run_experiment(cfg, workers=workers, write=False)
        all_rows.extend(rows)
        for s in summarize(rows):
            summaries.append(s)
            params.append(param)
            values.append(value)
    rows_csv = rows_to_csv(all_rows)
    (out_dir / f"{name}_rows.csv").write_text(rows_csv)
    write_summary(summaries, out_dir / f"{name}_summary.csv", {"parameter": params, "value": values})
    return out_dir / f"{name}_summary.csv"
