import math

import pytest

from coesearch import bench
from coesearch.backend import PlaintextBackend
from coesearch.bench import (BenchAssertionError, CostReport, ExperimentSpec, communication_table, leaf_cost_model,
                             leaf_time, measure, measure_e2e, our_costs, reports_csv, reports_table, run_experiment,
                             scaling_series, speedup_estimate, speedup_from_times, write_reports)
from coesearch.errors import ConfigurationError

SPEC = """
# BF-COIE over two sizes
scheme = bf-coie
n = 256, 1024
s = 4 8
trials = 2
seed = 3
"""


def test_spec_parsing():
    spec = ExperimentSpec.from_text(SPEC)
    assert spec.scheme == "bf-coie"
    assert spec.n_values == (256, 1024) and spec.s_values == (4, 8)
    assert (spec.trials, spec.seed, spec.backend, spec.mode) == (2, 3, "oracle", "fetch")


def test_spec_file(tmp_path):
    f = tmp_path / "exp.conf"
    f.write_text(SPEC + "lambda = 20\noutput = out.csv\n")
    spec = ExperimentSpec.from_file(f)
    assert spec.lam == 20 and spec.output == "out.csv"


@pytest.mark.parametrize("text", [
    "n = 10\ns = 1",  # no scheme
    "scheme = bf-coie\ns = 1",  # no n
    "scheme = nope\nn = 10\ns = 1",
    "scheme = bf-coie\nn = 10\ns = 11",
    "scheme = bf-coie\nn = 10\ns = 1\ntrials = 0",
    "scheme = bf-coie\nn = 10\ns = 1\nbackend = gpu",
    "scheme = bf-coie\nn = 10\ns = 1\nmode = fast",
    "scheme = warmup\nn = 10\ns = 1\nmode = e2e",
    "scheme = bf-coie\nn = 10\ns = 1\nworkers = 0",
    "scheme = bf-coie\nn = 10\ns = 1\ncolour = red",
    "scheme bf-coie",
])
def test_spec_rejections(text):
    with pytest.raises(ConfigurationError):
        ExperimentSpec.from_text(text)


@pytest.mark.parametrize("scheme", bench.SCHEMES)
def test_measure_checks_pass(scheme):
    r = measure(scheme, 500, 6, PlaintextBackend())
    assert r.checks and r.hmult == 0
    assert r.fetch_ciphertexts == r.ciphertexts + 1


def test_measure_ps_coie_exact_counts():
    r = measure("ps-coie", 300, 5, PlaintextBackend())
    assert (r.smult, r.hadd, r.ciphertexts, r.pir_instances, r.rounds) == (1500, 1495, 5, 5, 3)


def test_measure_warmup_has_no_protocol():
    r = measure("warmup", 300, 5, PlaintextBackend())
    assert r.rounds == 0 and r.pir_instances == 0


@pytest.mark.parametrize("scheme", ["bf-coie", "ps-coie", "bfs-code"])
def test_measure_e2e(scheme):
    r = measure_e2e(scheme, 200, 3, PlaintextBackend())
    assert r.rounds == (2 if scheme == "bfs-code" else 3)
    assert "hmult=0" in r.checks


def test_formula_mismatch_raises(monkeypatch):
    monkeypatch.setattr(bench, "warmup_cells", lambda n, s, eta=2: -1)
    with pytest.raises(BenchAssertionError):
        measure("warmup", 100, 2, PlaintextBackend())


def test_runs_are_deterministic(tmp_path):
    spec = ExperimentSpec.from_text(SPEC)
    a, b = run_experiment(spec), run_experiment(spec)
    assert reports_csv(a) == reports_csv(b)
    assert [(r.n, r.s, r.trial) for r in a] == [(n, s, t) for n in (256, 1024) for s in (4, 8) for t in (0, 1)]
    threaded = run_experiment(ExperimentSpec.from_text(SPEC + "workers = 3\n"))
    assert reports_csv(threaded) == reports_csv(a)


def test_trials_differ():
    rows = run_experiment(ExperimentSpec.from_text("scheme = bf-coie\nn = 4000\ns = 16\ntrials = 4"))
    assert len({r.hadd for r in rows}) > 1


def test_write_reports(tmp_path):
    reports = run_experiment(ExperimentSpec.from_text("scheme = ps-coie\nn = 50\ns = 2"))
    out = tmp_path / "sub" / "r.csv"
    write_reports(reports, out)
    assert out.read_text() == reports_csv(reports)
    assert "wall_clock" not in out.read_text()
    assert (tmp_path / "sub" / "r.csv.txt").read_text() == reports_table(reports)
    assert (tmp_path / "sub" / "r.csv.timing.csv").read_text().startswith("scheme,n,s,trial,seconds\n")


def test_lattice_backend_run():
    rows = run_experiment(ExperimentSpec.from_text("scheme = bf-coie\nn = 64\ns = 2\nbackend = lattice\n"
                                                   "lwe_dimension = 4"))
    assert rows[0].checks


def test_report_row_excludes_timing():
    r = CostReport("x", 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, "", wall_clock=3.0)
    assert "wall_clock" not in r.row()
    assert r == CostReport("x", 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, "", wall_clock=9.0)


# -- model and tables ----------------------------------------------------------------

def test_leaf_model_at_reference_point():
    c = leaf_cost_model(10_000, 16)
    lg = math.ceil(math.log2(10_000))
    assert lg == 14
    assert (c.rounds, c.matches, c.hmult, c.hadd) == (16, 16, 160_000, 160_000 * 14)
    assert c.ciphertexts == 16 * (2 * 14 + 16) == 704
    assert c.label == "model"
    with pytest.raises(ValueError):
        leaf_cost_model(10, 0)


def test_speedup_two_routes_agree():
    direct = speedup_estimate(16, 1.5, 1800)
    assert direct == pytest.approx(16 * 2.5 / (1.5 + 1 / 1800))
    assert direct == pytest.approx(26.657, abs=5e-4)
    # absolute times: match 1.5 units, a LEAF+ fetch 1 unit
    assert speedup_from_times(16, 1.5, 1.0, 1800) == pytest.approx(direct, rel=1e-12)
    assert leaf_time(16, 1.5, 1.0) == 40.0


def test_speedup_limits():
    assert speedup_estimate(16, 0.0, 1.0) == pytest.approx(16)
    assert speedup_estimate(16, 1e9, 1800) == pytest.approx(16, rel=1e-6)


def test_our_costs_and_table():
    c = our_costs(10_000, 16)
    assert c["bf-coie"]["ciphertexts"] == 2221 and c["bf-coie"]["pir"] == 32
    assert c["ps-coie"]["ciphertexts"] == 17 and c["ps-coie"]["pir"] == 16
    assert c["bfs-code"]["ciphertexts"] == 1407 and c["bfs-code"]["rounds"] == 2
    table = communication_table()
    assert "LEAF+ (model)" in table
    for v in ("704", "1323", "1321", "2221", "1407"):
        assert v in table


def test_scaling_series():
    rows = scaling_series("ps-coie", [10, 20, 40], 2)
    assert [r.smult for r in rows] == [20, 40, 80]
