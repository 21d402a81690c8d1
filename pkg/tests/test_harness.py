import json

import numpy as np
import pytest

from cbai import CbaiInstance
from cbai.harness import (
    CSV_COLUMNS,
    AlgorithmSpec,
    ConfigError,
    DiagnosticsError,
    ExperimentConfig,
    ResultRow,
    diagnostics,
    load_config,
    nearest_rank,
    read_rows,
    rows_to_csv,
    run_experiment,
    run_single,
    summarize,
    write_rows,
)
from cbai.instances import InstanceSpec, gen_irrelevant_dimensions, gen_orthonormal, gen_unit_sphere


def small_config(**over):
    raw = {
        "instance": {"family": "irrelevant-dimensions", "d": 3, "eps": 0.2},
        "algorithms": ["uniform", {"kind": "g-acol", "name": "gacol"}],
        "seeds": [0, 1, 2],
    }
    raw.update(over)
    return raw


def sort_percentile(values, q):
    """Independent nearest-rank: smallest value with at least q% of the sample at or below it."""
    s = sorted(values)
    n = len(s)
    for i, x in enumerate(s):
        if (i + 1) * 100 >= q * n:
            return x
    return s[-1]


def row(algo, seed, queries, correct=True, reason="certified"):
    return ResultRow("inst", "{}", algo, seed, queries, correct, 0, reason, 0.0)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.from_dict(small_config())
        assert len(cfg.algorithms) == 2 and cfg.seeds == (0, 1, 2)
        assert cfg.algorithms[0].name == "uniform"
        assert cfg.algorithms[1].bounds == "tuned" and cfg.algorithms[1].beta == 0.25

    def test_seed_count(self):
        assert ExperimentConfig.from_dict(small_config(seeds=4)).seeds == (0, 1, 2, 3)

    @pytest.mark.parametrize("over,field", [
        ({"algorithms": []}, "algorithms"),
        ({"seeds": []}, "seeds"),
        ({"delta": 1.5}, "delta"),
        ({"algorithms": [{"kind": "acol", "delta": 0.0}]}, "algorithms[0].delta"),
        ({"algorithms": [{"kind": "uniform", "v": 2.5}]}, "algorithms[0].v"),
        ({"algorithms": [{"kind": "warp"}]}, "algorithms[0].kind"),
        ({"algorithms": [{"kind": "g-acol", "bounds": "magic"}]}, "algorithms[0].bounds"),
        ({"algorithms": ["uniform", "uniform"]}, "unique"),
        ({"parallelism": 0}, "parallelism"),
        ({"colour": 1}, "unknown"),
        ({"instance": {"family": "irrelevant-dimensions", "d": 3}}, "instances[0]"),
    ])
    def test_errors(self, over, field):
        with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
            ExperimentConfig.from_dict(small_config(**over))

    def test_load(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps(small_config()))
        assert load_config(tmp_path / "c.json").instances[0].family == "irrelevant-dimensions"
        (tmp_path / "bad.json").write_text("{\n  oops")
        with pytest.raises(ConfigError, match="line 2"):
            load_config(tmp_path / "bad.json")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")


class TestRunExperiment:
    def test_cardinality_and_order(self):
        rows = run_experiment(ExperimentConfig.from_dict(small_config()))
        assert len(rows) == 6
        keys = [(r.instance, r.algorithm, r.seed) for r in rows]
        assert keys == sorted(keys)
        assert all(r.correct for r in rows)

    def test_byte_identical_rerun(self, tmp_path):
        cfg = ExperimentConfig.from_dict(small_config(output=str(tmp_path / "a.csv")))
        run_experiment(cfg)
        first = (tmp_path / "a.csv").read_bytes()
        run_experiment(cfg)
        assert (tmp_path / "a.csv").read_bytes() == first
        assert (tmp_path / "a.timing.csv").exists()

    def test_parallel_matches_serial(self):
        cfg = ExperimentConfig.from_dict(small_config())
        serial = rows_to_csv(run_experiment(cfg, workers=1))
        assert rows_to_csv(run_experiment(cfg, workers=2)) == serial

    def test_env_threads(self, monkeypatch):
        cfg = ExperimentConfig.from_dict(small_config())
        monkeypatch.setenv("CBAI_THREADS", "0")
        with pytest.raises(ConfigError):
            run_experiment(cfg)
        monkeypatch.setenv("CBAI_THREADS", "2")
        assert len(run_experiment(cfg)) == 6

    def test_streams_differ_by_algorithm(self):
        spec = InstanceSpec("irrelevant-dimensions", {"d": 3, "eps": 0.2})
        a = AlgorithmSpec.from_dict({"kind": "g-acol-uniform", "name": "a"})
        b = AlgorithmSpec.from_dict({"kind": "g-acol-uniform", "name": "b"})
        qa = [run_single(spec, a, s).queries for s in range(5)]
        assert qa == [run_single(spec, a, s).queries for s in range(5)]
        assert qa != [run_single(spec, b, s).queries for s in range(5)]

    def test_every_kind_runs(self):
        spec = InstanceSpec("line-1d", {})
        for kind in ["acol", "oracle", "g-allocation", "uniform", "g-acol", "g-acol-uniform",
                     "greedy-maxvar", "adaptive-uniform", "maxrew-u", "maxrew-f"]:
            r = run_single(spec, AlgorithmSpec.from_dict({"kind": kind}), 0)
            assert r.correct, kind

    def test_csv_round_trip(self, tmp_path):
        rows = run_experiment(ExperimentConfig.from_dict(small_config()))
        write_rows(rows, tmp_path / "r.csv")
        back = read_rows(tmp_path / "r.csv")
        assert [r._replace(wall_time=0) for r in back] == [r._replace(wall_time=0) for r in rows]
        header = (tmp_path / "r.csv").read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        assert "true" in (tmp_path / "r.csv").read_text()


class TestSummary:
    def test_median_of_three(self):
        assert nearest_rank([1, 2, 3], 50) == 2
        s = summarize([row("a", i, q) for i, q in enumerate([3, 1, 2])])
        assert s[0].median == 2 and s[0].correct_rate == 1.0 and s[0].exhausted == 0

    def test_against_sort_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            vals = rng.integers(0, 1000, size=int(rng.integers(1, 60))).tolist()
            for q in (25, 50, 75):
                assert nearest_rank(vals, q) == sort_percentile(vals, q)

    def test_rates(self):
        rows = [row("a", 0, 5, True), row("a", 1, 7, False, "exhausted-budget"),
                row("b", 0, 1, True)]
        s = {r.algorithm: r for r in summarize(rows)}
        assert s["a"].correct_rate == 0.5 and s["a"].exhausted == 1
        assert s["b"].runs == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize([])
        with pytest.raises(ValueError):
            nearest_rank([], 50)


class TestDiagnostics:
    def test_tight(self):
        dg = diagnostics(gen_orthonormal(3, 0.5))
        assert dg.hclb_all == pytest.approx(12.0, rel=1e-3)
        assert dg.worst_case == pytest.approx(12.0)

    def test_chain_irrelevant(self):
        dg = diagnostics(gen_irrelevant_dimensions(3, 0.1))
        assert dg.hclb <= dg.hclb_all * (1 + 1e-3) <= dg.worst_case * (1 + 1e-3) ** 2
        assert dg.min_margin == pytest.approx(0.1)

    def test_single_arm(self):
        dg = diagnostics(CbaiInstance([[1.0]], [1.0], [-2.0], 0.0, 0.0))
        assert dg.hclb_all == pytest.approx(0.25)
        assert dg.worst_case == pytest.approx(0.25)
        assert dg.n_superlevel == 1

    def test_sphere(self):
        for seed in range(5):
            diagnostics(gen_unit_sphere(5, 12, seed))

    def test_violation_raises(self):
        # a negative tolerance turns the tight instance into a reported violation
        with pytest.raises(DiagnosticsError):
            diagnostics(gen_orthonormal(3, 0.5), rtol=-0.01)

    def test_boundary(self):
        with pytest.raises(ValueError):
            diagnostics(CbaiInstance([[1.0], [0.5]], [1.0], [1.0], 0.5, 0.0))
