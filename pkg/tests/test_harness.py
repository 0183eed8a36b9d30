import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlspb.errors import (DivergentCostError, EmptyComparisonError, NoOpFilterError, ParseError,
                          ValidationError)
from qlspb.filters import order_for
from qlspb.harness import (NO_FILTER, BaselineRecord, ReportTable, SweepReport, bundled_baseline,
                           compare, emit_report, filter_cost, ingest_baseline, known_norm_row,
                           read_report, recommend_delta, sweep_delta, sweep_table, total_cost,
                           trace_budget, worst_case_known_norm)
from qlspb.instances import NON_HERMITIAN, EnsembleSpec, generate_ensemble
from qlspb.linalg import bures_from_infidelity


def test_filter_cost_exact_input():
    f = filter_cost(0.0, 1e-3, 80.0)
    assert f.eta_kp == 1.0 and f.success == 1.0
    assert f.degree == 2 * order_for(1 / 80, 1.0)


def test_filter_cost_halving():
    on = filter_cost(0.04, 1e-3, 320.0, early_halving=True)
    off = filter_cost(0.04, 1e-3, 320.0, early_halving=False)
    assert on.expected_calls < on.degree
    assert on.expected_calls == pytest.approx(on.degree * (0.96 + 0.04 * 0.5))
    assert off.expected_calls == off.degree


def test_filter_cost_eta_kp():
    mu2, eps = 0.04, 1e-3
    f = filter_cost(mu2, eps, 320.0)
    assert f.eta_kp == pytest.approx(trace_budget(eps) * math.sqrt(1 - mu2) / math.sqrt(mu2))
    assert trace_budget(eps) == pytest.approx(eps * math.sqrt(1 - eps**2 / 4))


def test_filter_noop():
    with pytest.raises(NoOpFilterError):
        filter_cost(0.01, bures_from_infidelity(0.01) * 1.01, 20.0)
    with pytest.raises(ValidationError):
        filter_cost(1.0, 0.01, 20.0)


def test_total_cost_examples():
    assert total_cost(100, 1.0).expected_total == 100
    assert total_cost(100, 0.5).expected_total == 200
    f = filter_cost(0.0, 0.01, 20.0, early_halving=False)
    assert total_cost(100, 1.0, f).expected_total == 100 + f.degree
    with pytest.raises(DivergentCostError):
        total_cost(100, 0.0)


@given(st.integers(1, 10**5), st.floats(1e-3, 1.0), st.floats(0.0, 0.9), st.floats(2, 3000), st.booleans())
def test_total_cost_invariants(deg, q, mu2, kappa, halving):
    eps = 1e-3
    f = filter_cost(mu2, eps, kappa, halving) if mu2 == 0 or eps < bures_from_infidelity(mu2) else NO_FILTER
    c = total_cost(deg, q, f)
    assert c.expected_total >= deg
    assert total_cost(deg, q).expected_total == pytest.approx(deg / q)
    d = total_cost(deg, q, NO_FILTER, doubled_stage1=True)
    assert d.expected_total == pytest.approx(2 * deg / q)


def test_worst_case_lines():
    assert worst_case_known_norm(0.01) == pytest.approx(5.65, abs=0.01)
    assert worst_case_known_norm(0.001) == pytest.approx(7.95, abs=0.01)


def test_recommend_convex():
    d = np.array([0.4, 0.3, 0.2, 0.15, 0.1, 0.05])
    f = lambda x: (np.log(x) - np.log(0.17)) ** 2 + 3
    dstar, tot, edge = recommend_delta(d, f(d))
    # shape-preserving interpolation cannot dip below the discrete minimum's neighbours
    assert 0.1 <= dstar <= 0.2
    assert tot <= f(d).min() + 1e-9 and not edge


def test_recommend_two_point_boundary():
    dstar, tot, edge = recommend_delta([0.3, 0.05], [100.0, 140.0])
    assert dstar == pytest.approx(0.3) and tot == 100.0 and edge


@pytest.fixture(scope="module")
def sweep20():
    ens = generate_ensemble(EnsembleSpec(NON_HERMITIAN, 16, 20.0, 10, 1))
    return sweep_delta(ens, [0.3, 0.2, 0.1, 0.05], [1e-2, 1e-3, 1e-4])


def test_sweep_report_invariants(sweep20):
    r = sweep20
    assert len(r.stage1_costs) == 4 and not r.partial
    for e, curve in r.total_cost_curves.items():
        assert min(r.delta_grid) <= r.recommended_delta[e] <= max(r.delta_grid)
        assert r.total_at_recommended[e] <= min(curve) + 1e-9
    eps = sorted(r.recommended_delta)
    for a, b in zip(eps, eps[1:]):
        assert r.total_at_recommended[a] >= r.total_at_recommended[b] - 1e-9
    assert all(0.9 * d <= e <= d for d, e, ok in zip(r.delta_grid, r.stage1_errors, r.in_band) if ok)


def test_sweep_json_round_trip(sweep20, tmp_path):
    sweep20.save(tmp_path / "s.json")
    back = SweepReport.load(tmp_path / "s.json")
    assert back.recommended_delta == sweep20.recommended_delta
    assert back.total_cost_curves == sweep20.total_cost_curves


def test_sweep_validation():
    ens = generate_ensemble(EnsembleSpec(NON_HERMITIAN, 8, 10.0, 2, 1))
    with pytest.raises(ValidationError):
        sweep_delta(ens, [0.3, 0.2], [1e-3])
    with pytest.raises(ValidationError):
        sweep_delta(ens, [0.3, 0.2, 0.1], [0.2])


def test_sweep_flags_infeasible_delta(monkeypatch):
    import qlspb.harness as h
    from qlspb.errors import InfeasibleTargetError
    real = h.calibrate_eta

    def fake(ens, d, **kw):
        if d == 0.1:
            raise InfeasibleTargetError("forced")
        return real(ens, d, **kw)

    monkeypatch.setattr(h, "calibrate_eta", fake)
    ens = generate_ensemble(EnsembleSpec(NON_HERMITIAN, 8, 10.0, 3, 1))
    rep = sweep_delta(ens, [0.3, 0.2, 0.1], [1e-3])
    assert rep.partial and rep.flagged_deltas == [0.1]
    assert math.isnan(rep.stage1_costs[2]) and 1e-3 in rep.recommended_delta


def test_ingest_examples():
    nh32 = bundled_baseline("qw_nonhermitian_32.csv")
    r = next(r for r in nh32 if r.kappa == 20 and r.delta == 0.4)
    assert (r.cost, r.mean_error, r.dimension) == (68, 0.385, 32)
    nh64 = bundled_baseline("qw_nonhermitian_64.csv")
    assert next(r for r in nh64 if r.kappa == 320 and r.delta == 0.15).cost == 2760
    rnd = bundled_baseline("qw_randomised_8.csv")
    r = next(r for r in rnd if r.method == "Randomised" and r.kappa == 20)
    assert r.cost == 642 and r.alpha_avg is None
    assert next(r for r in rnd if r.method == "QW" and r.kappa == 20).alpha_avg == 1.75


def test_ingest_errors(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("# note\nmethod,kappa,delta,cost,mean_error\nQW,20,0.3,84,0.299\nQW,20,0.3,abc,0.3\n")
    with pytest.raises(ParseError, match="line 4"):
        ingest_baseline(p)
    p.write_text("method,kappa,delta,cost,mean_error\nQW,20,0.3,0,0.3\n")
    with pytest.raises(ValidationError, match="positive"):
        ingest_baseline(p)
    p.write_text("method,kappa,cost\nQW,20,3\n")
    with pytest.raises(ParseError):
        ingest_baseline(p)


def _report(kappa=20.0, costs=(120.0, 140.0, 170.0), label=""):
    return SweepReport(NON_HERMITIAN, 32, kappa, "unknown", [0.3, 0.2, 0.15], list(costs),
                       [0.29, 0.19, 0.14], [0.1, 0.05, 0.03], [True] * 3, label=label)


def test_compare_and_doubling():
    base = bundled_baseline("qw_nonhermitian_32.csv")
    rows = compare(_report(), base)
    assert [r["delta"] for r in rows] == [0.3, 0.2, 0.15]
    assert rows[0]["rho"] == pytest.approx(84 / 120)
    dbl = compare(_report(), base, double_stage1=True)
    for a, b in zip(rows, dbl):
        assert b["rho"] == 2 * a["rho"]


@given(st.floats(1e-3, 1e3))
def test_rho_scale_invariance(c):
    base = [BaselineRecord("QW", 20.0, 0.3, 84.0 * c, 0.3, dimension=32)]
    r = compare(_report(costs=(120.0 * c, 1, 1)), base)[0]["rho"]
    assert r == pytest.approx(84 / 120, rel=1e-12)


def test_compare_no_overlap():
    base = bundled_baseline("qw_nonhermitian_32.csv")
    with pytest.raises(EmptyComparisonError):
        compare(_report(kappa=33.0), base)


def test_compare_by_label():
    base = bundled_baseline("qw_sparse_32.csv")
    rep = _report(kappa=18.1, costs=(123.0, 1, 1), label="kappa1")
    assert compare(rep, base)[0]["rho"] == pytest.approx(91.4 / 123.0)


def test_compare_total_cost(sweep20):
    base = [BaselineRecord("QW", 20.0, d, c, e, dimension=16)
            for d, c, e in ((0.4, 68, 0.385), (0.3, 84, 0.299), (0.2, 112, 0.198))]
    a = compare(sweep20, base, epsilon=1e-3)[0]
    b = compare(sweep20, base, epsilon=1e-3, double_stage1=True)[0]
    assert a["cost_sc"] == sweep20.total_at_recommended[1e-3]
    assert a["cost_qw"] < b["cost_qw"] < 2 * a["cost_qw"]


def test_report_csv_empty(tmp_path):
    emit_report(ReportTable(), "csv", tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "kappa,axis,axis_value,metric,value\n"


def test_report_round_trip(sweep20, tmp_path):
    t = sweep_table(sweep20)
    emit_report(t, "json", tmp_path / "r.json")
    j = read_report(tmp_path / "r.json")
    emit_report(j, "csv", tmp_path / "r.csv")
    c = read_report(tmp_path / "r.csv")
    emit_report(c, "json", tmp_path / "r2.json")
    back = read_report(tmp_path / "r2.json")
    assert len(back) == len(t)
    for x, y in zip(back.sorted_rows(), t.sorted_rows()):
        assert x[:2] == y[:2] and x[3] == y[3]
        assert x[4] == pytest.approx(y[4], rel=5e-6)
    with pytest.raises(ValidationError):
        emit_report(t, "xml", tmp_path / "r.xml")


def test_known_norm_report_has_cost_over_kappa(tmp_path):
    ens = generate_ensemble(EnsembleSpec(NON_HERMITIAN, 16, 20.0, 8, 1))
    row = known_norm_row(ens, 0.01)
    assert row.cost_avg_over_kappa == pytest.approx(row.cost_avg / 20)
    from qlspb.harness import known_rows_table
    emit_report(known_rows_table([row]), "csv", tmp_path / "k.csv")
    assert "cost_avg_over_kappa" in (tmp_path / "k.csv").read_text()
    wc = known_norm_row(ens, 0.01, "worst-case")
    assert wc.eta == pytest.approx(0.01 / math.sqrt(2))
