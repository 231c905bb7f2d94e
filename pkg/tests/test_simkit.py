import math
from dataclasses import replace

import numpy as np
import pytest

from sempower import alloc, config, simkit
from sempower.perception import Metric, Scheme

CFG = config.load()


def scenario(scheme="coded", metric="CLIP"):
    return simkit.Scenario(CFG.model(Scheme(scheme), Metric(metric)), CFG.channel)


def spec(kind="PowerVsPbar", **kw):
    kw.setdefault("p_bar_grid", (0.4, 0.6, 0.8))
    kw.setdefault("n_realizations", 30)
    kw.setdefault("seed", 123)
    return simkit.ExperimentSpec("t", kind, **kw)


def test_spec_validation():
    with pytest.raises(ValueError):
        spec(p_bar_grid=(0.5, 0.4))
    with pytest.raises(ValueError):
        spec(p_bar_grid=(0.5, 0.5))
    with pytest.raises(ValueError):
        spec(n_realizations=0)
    with pytest.raises(ValueError):
        spec(kind="Histogram")
    with pytest.raises(ValueError):
        spec(methods=("greedy",))
    with pytest.raises(ValueError):
        spec(kind="PerBitPower", scheme="uncoded")
    with pytest.raises(ValueError):
        spec(kind="PerceptionCdf")
    with pytest.raises(ValueError):
        spec(seed=-1)
    with pytest.raises(ValueError):
        spec(kind="LinkValidate", psi_grid=(0.1, 0.7))


def test_rng_stream_reproducible_and_independent():
    a = simkit.rng_stream(5, 3).standard_normal(1000)
    b = simkit.rng_stream(5, 3).standard_normal(1000)
    assert np.array_equal(a, b)
    x = simkit.rng_stream(5, 0).exponential(size=100_000)
    y = simkit.rng_stream(5, 1).exponential(size=100_000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.01
    z = simkit.rng_stream(6, 0).exponential(size=100_000)
    assert abs(np.corrcoef(x, z)[0, 1]) < 0.01


def test_simulate_shares_gains_and_keeps_order():
    s = spec()
    recs = simkit.simulate(s, scenario())
    assert len(recs) == 3 and all(len(r) == 30 for r in recs)
    for k in range(30):
        gains = {recs[j][k].gain_sq for j in range(3)}
        assert len(gains) == 1
        assert recs[0][k].index == k
    for row in recs:
        for rec in row:
            for caps in rec.capacities.values():
                assert all(c >= 0 for c in caps)


def test_parallel_equals_serial():
    s = spec(n_realizations=12)
    serial = simkit.run_power_vs_pbar(s, scenario())
    parallel = simkit.run_power_vs_pbar(s, scenario(), workers=2)
    assert serial == parallel


def test_mean_stderr():
    assert all(math.isnan(v) for v in simkit.mean_stderr([]))
    m, se = simkit.mean_stderr([1.0, 2.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1 / math.sqrt(3))
    assert math.isnan(simkit.mean_stderr([4.0])[1])


def test_power_vs_pbar_worst_case_is_free():
    s = spec(p_bar_grid=(0.5, 1.0))
    table = simkit.run_power_vs_pbar(s, scenario())
    assert table.header == simkit.POWER_VS_PBAR_HEADER
    for pbar, method, mean, _, n_ok in table.rows:
        if pbar == 1.0:
            assert mean == 0.0 and n_ok == 30


@pytest.mark.parametrize("scheme", ["uncoded", "coded"])
def test_power_curves_non_increasing_and_dominated(scheme):
    grid = (0.35, 0.45, 0.55, 0.65, 0.75)
    table = simkit.run_power_vs_pbar(spec(p_bar_grid=grid, n_realizations=40), scenario(scheme))
    means = {(r[0], r[1]): r[2] for r in table.rows}
    for method in alloc.METHODS:
        vals = [means[(p, method)] for p in grid]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    for p in grid:
        assert means[(p, "bisection")] <= means[(p, "unaware")] + 1e-9
        assert means[(p, "bisection")] <= means[(p, "proportional")] + 1e-9


def test_infeasible_rows_counted_not_raised():
    s = spec(p_bar_grid=(0.2, 0.5))
    table = simkit.run_power_vs_pbar(s, scenario())
    for pbar, method, mean, se, n_ok in table.rows:
        if pbar == 0.2:
            assert n_ok == 0 and math.isnan(mean)


def test_per_bit_accounting_and_zero_region():
    s = spec("PerBitPower", metric="MSSSIM", p_bar_grid=(0.4, 0.5, 0.6, 0.8))
    sc = scenario("coded", "MSSSIM")
    recs = simkit.simulate(s, sc)
    per_bit = simkit.per_bit_table(s, sc, recs)
    totals = simkit.power_table(s, recs)
    total = {(r[0], r[1]): r[2] for r in totals.rows}
    bits = {st.name: st.bits for st in sc.model.streams}
    acc = {}
    for pbar, method, name, mean, zero_frac, n_ok in per_bit.rows:
        acc[(pbar, method)] = acc.get((pbar, method), 0.0) + mean * bits[name]
    for key, value in acc.items():
        assert value == pytest.approx(total[key], rel=1e-12)
    # a stream that got no power reports exactly zero per-bit power
    one_stream = False
    for row in recs:
        for rec in row:
            res = rec.results["bisection"]
            if res is not None and sum(q == 0.0 for q in res.powers) == 1:
                one_stream = True
                i = res.powers.index(0.0)
                assert alloc.symbol_count(sc.model, i) * res.powers[i] / sc.model.streams[i].bits == 0.0
    assert one_stream


def test_error_capacity_structure():
    s = spec("ErrorAndCapacity", p_bar_grid=(0.4, 0.6, 0.8))
    recs = simkit.simulate(s, scenario())
    zero_seen = False
    for row in recs:
        for rec in row:
            un = rec.results["unaware"]
            assert un.capacities[0] == pytest.approx(un.capacities[1], abs=1e-9)
            pr = rec.results["proportional"]
            assert abs(pr.errors[0] - pr.errors[1]) <= 1e-8
            for res in rec.results.values():
                for q, e, c in zip(res.powers, res.errors, res.capacities):
                    if q == 0.0:
                        zero_seen = True
                        assert e == 1.0 and c == 0.0
    assert zero_seen
    table = simkit.error_capacity_table(s, scenario(), recs)
    assert table.header == simkit.ERROR_CAPACITY_HEADER


def test_achieved_perception_limits():
    sc = scenario()
    real = simkit.draw_realization(CFG.channel, 2, simkit.rng_stream(1, 0))
    for method in alloc.METHODS:
        assert simkit.achieved_perception(sc.model, real, method, math.inf) == sc.model.p_best
        assert simkit.achieved_perception(sc.model, real, method, 0.0) == 1.0
        p = simkit.achieved_perception(sc.model, real, method, 0.05)
        res = alloc.allocate(alloc.AllocationProblem(sc.model, real, p), method)
        assert res.total_power <= 0.05


def test_perception_cdf_dominance():
    s = spec("PerceptionCdf", p_bar_grid=(), power_budget_grid=(0.01, 0.1), n_realizations=25)
    samples = simkit.perception_samples(s, scenario())
    assert samples.shape == (2, 3, 25)
    assert np.all(samples <= 1.0)
    bis = s.methods.index("bisection")
    for other in range(3):
        assert np.all(samples[:, bis] <= samples[:, other] + 1e-6)
    table = simkit.run_perception_cdf(s, scenario())
    assert table.header == simkit.CDF_HEADER
    assert len(table.rows) == 2 * 3 * 101


def test_link_validate_examples():
    s = spec("LinkValidate", p_bar_grid=(), psi_grid=(0.0, 0.01, 0.5), n_blocks=100_000, block_bits=100)
    table = simkit.run_link_validate(s, scenario())
    rows = {(r[0], r[1]): r for r in table.rows}
    assert rows[("ber", 0.0)][3] == 0.0 and rows[("bler", 0.0)][3] == 0.0
    assert rows[("ber", 0.5)][3] == pytest.approx(0.5, abs=4 * math.sqrt(0.25 / 1e7))
    assert rows[("bler", 0.01)][2] == pytest.approx(1 - 0.99**100, rel=1e-12)
    assert rows[("bler", 0.01)][2] == pytest.approx(0.6340, abs=5e-5)
    assert all(r[6] for r in table.rows)


def test_run_experiment_dispatch():
    s = spec(n_realizations=3)
    assert simkit.run_experiment(s, scenario()).header == simkit.POWER_VS_PBAR_HEADER
    s = replace(s, kind="ErrorAndCapacity")
    assert simkit.run_experiment(s, scenario()).header == simkit.ERROR_CAPACITY_HEADER
