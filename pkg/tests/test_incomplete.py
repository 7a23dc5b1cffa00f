"""Subsampling designs, incomplete sums, and the subsampled moment bound."""

import math

import numpy as np
import pytest
from scipy import stats

from ustatkit.combinatorics import count_tuples, rank_tuple
from ustatkit.incomplete import (
    SamplingDesign,
    WeightSet,
    bernoulli_sum_moment_check,
    draw_design,
    incomplete_moment_experiment,
    incomplete_ustat,
)
from ustatkit.kernels import Distribution, builtin_kernel, stream
from ustatkit.ustat import complete_ustat


# ---------------------------------------------------------------------------
# designs


def test_design_validation():
    with pytest.raises(ValueError):
        SamplingDesign("bogus")
    with pytest.raises(ValueError):
        SamplingDesign.bernoulli(1.5)
    with pytest.raises(ValueError):
        SamplingDesign("bernoulli", rate=0.5, draws=3)
    with pytest.raises(ValueError):
        SamplingDesign("without_replacement", draws=-1)
    with pytest.raises(ValueError):
        SamplingDesign("without_replacement", draws=3, rate=0.5)


def test_design_dict_round_trip():
    for d in [
        SamplingDesign.bernoulli(0.25),
        SamplingDesign.without_replacement(10),
        SamplingDesign.with_replacement(7),
    ]:
        assert SamplingDesign.from_dict(d.to_dict()) == d
    with pytest.raises(ValueError):
        SamplingDesign.from_dict({"variant": "bernoulli"})
    with pytest.raises(ValueError):
        SamplingDesign.from_dict({"variant": "without_replacement"})


def test_without_replacement_counts_and_distinctness():
    design = SamplingDesign.without_replacement(10)
    ws = draw_design(design, 8, 2, seed=1)
    assert ws.size == 10
    assert ws.total_weight == 10
    assert np.all(np.diff(ws.ranks) > 0)
    assert np.all(ws.weights == 1)
    with pytest.raises(ValueError):
        draw_design(SamplingDesign.without_replacement(29), 8, 2, seed=1)


def test_with_replacement_weights_sum_to_draws():
    design = SamplingDesign.with_replacement(40)
    ws = draw_design(design, 8, 2, seed=2)
    assert ws.total_weight == 40
    assert ws.size <= 28


def test_bernoulli_count_matches_binomial_moments():
    total = count_tuples(8, 2)
    rate = 0.3
    sizes = []
    for rep in range(1000):
        ws = draw_design(SamplingDesign.bernoulli(rate),
                         8, 2, stream(5, "bern", rep))
        sizes.append(ws.size)
    sizes = np.asarray(sizes, dtype=np.float64)
    want_mean = total * rate
    want_sd = math.sqrt(total * rate * (1 - rate))
    assert abs(sizes.mean() - want_mean) <= 3.0 * want_sd / math.sqrt(1000)
    assert sizes.min() >= 0 and sizes.max() <= total


def test_bernoulli_ranks_uniform_goodness_of_fit():
    # with N kept out of K tuples each distinct rank is equally likely;
    # pool many draws and chi-square the per-rank occupancy counts,
    # scaling by (K-1)/(K-N) for the without-replacement correlation
    n, m = 8, 2
    total = count_tuples(n, m)
    per_draw = 7
    reps = 3000
    counts = np.zeros(total)
    for rep in range(reps):
        ws = draw_design(SamplingDesign.without_replacement(per_draw),
                         n, m, stream(11, "gof", rep))
        counts[ws.ranks] += 1
    expected = reps * per_draw / total
    x2 = float(((counts - expected) ** 2 / expected).sum())
    x2_adj = x2 * (total - 1) / (total - per_draw)
    pvalue = stats.chi2.sf(x2_adj, df=total - 1)
    assert pvalue > 0.001, (x2_adj, pvalue)


def test_rank_extremes_reachable():
    # full-rate bernoulli keeps everything; zero rate keeps nothing
    ws_all = draw_design(SamplingDesign.bernoulli(1.0), 7, 2, seed=3)
    assert ws_all.size == count_tuples(7, 2)
    ws_none = draw_design(SamplingDesign.bernoulli(0.0), 7, 2, seed=3)
    assert ws_none.size == 0


# ---------------------------------------------------------------------------
# weight sets


def test_weight_set_validation():
    with pytest.raises(ValueError):
        WeightSet(5, 2, np.array([3, 1]), np.array([1, 1]))
    with pytest.raises(ValueError):
        WeightSet(5, 2, np.array([0, 100]), np.array([1, 1]))
    with pytest.raises(ValueError):
        WeightSet(5, 2, np.array([0, 1]), np.array([1, -1]))


def test_weight_set_lookup_and_items():
    ranks = np.array([rank_tuple((0, 1)), rank_tuple((1, 3))])
    ws = WeightSet(5, 2, ranks, np.array([2, 5]))
    assert ws.weight_of((0, 1)) == 2
    assert ws.weight_of((1, 3)) == 5
    assert ws.weight_of((0, 2)) == 0
    assert dict(ws.items()) == {(0, 1): 2, (1, 3): 5}
    rows = ws.indices()
    assert rows.shape == (2, 2)


# ---------------------------------------------------------------------------
# incomplete evaluation


def test_full_bernoulli_equals_complete_bit_for_bit():
    h = builtin_kernel("product", 2)
    rng = np.random.default_rng(19)
    sample = rng.normal(size=10)
    ws = draw_design(SamplingDesign.bernoulli(1.0), 10, 2, seed=0)
    inc = incomplete_ustat(h, sample, ws)
    comp = complete_ustat(h, sample)
    assert inc.value == comp.value  # exact equality, same pipeline
    assert inc.terms == comp.terms


def test_incomplete_matches_direct_weighted_sum():
    h = builtin_kernel("product", 2)
    sample = np.array([1.0, -2.0, 0.5, 3.0])
    ws = WeightSet(4, 2,
                   np.array([rank_tuple((0, 1)), rank_tuple((2, 3))]),
                   np.array([2, 3]))
    got = incomplete_ustat(h, sample, ws).value
    want = 2 * (1.0 * -2.0) + 3 * (0.5 * 3.0)
    assert got == pytest.approx(want)


def test_incomplete_empty_selection():
    h = builtin_kernel("product", 2)
    ws = WeightSet(4, 2, np.array([], dtype=np.int64), np.array([], dtype=np.int64))
    res = incomplete_ustat(h, np.ones(4), ws)
    assert res.value == 0.0 and res.terms == 0


def test_incomplete_validates_arity_and_length():
    h = builtin_kernel("product", 3)
    ws = draw_design(SamplingDesign.without_replacement(2), 5, 2, seed=0)
    with pytest.raises(ValueError):
        incomplete_ustat(h, np.ones(5), ws)
    h2 = builtin_kernel("product", 2)
    with pytest.raises(ValueError):
        incomplete_ustat(h2, np.ones(3), ws)


def test_with_replacement_unbiased_for_complete_average():
    # E[subsampled sum / draws] equals U_n / C(n,m)
    h = builtin_kernel("product", 2)
    rng = np.random.default_rng(23)
    sample = rng.normal(size=9)
    target = complete_ustat(h, sample).value / count_tuples(9, 2)
    draws = 64
    reps = 2000
    vals = np.empty(reps)
    for rep in range(reps):
        ws = draw_design(SamplingDesign.with_replacement(draws),
                         9, 2, stream(29, "unb", rep))
        vals[rep] = incomplete_ustat(h, sample, ws).value / draws
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean() - target) <= 4.0 * se


# ---------------------------------------------------------------------------
# Bernoulli-sum moment check


def test_bernoulli_sum_moment_bound_holds():
    chk = bernoulli_sum_moment_check(4, 6, 0.1, p=2.0, q=2.0,
                                     replications=20000, seed=7)
    assert chk.ratio <= 1.0
    assert chk.estimate > 0


def test_bernoulli_sum_moment_degenerate_rates():
    chk0 = bernoulli_sum_moment_check(3, 3, 0.0, p=2.0, q=4.0,
                                      replications=100, seed=1)
    assert chk0.estimate == 0.0
    chk1 = bernoulli_sum_moment_check(3, 3, 1.0, p=2.0, q=2.0,
                                      replications=100, seed=1)
    # all entries are 1: Y = a b^p exactly
    assert chk1.estimate == pytest.approx(3.0 * 9.0)


def test_bernoulli_sum_moment_validation():
    with pytest.raises(ValueError):
        bernoulli_sum_moment_check(3, 3, 0.5, p=1.0, q=2.0)
    with pytest.raises(ValueError):
        bernoulli_sum_moment_check(3, 3, 0.5, p=2.0, q=1.5)
    with pytest.raises(ValueError):
        bernoulli_sum_moment_check(3, 3, 1.5, p=2.0, q=2.0)
    with pytest.raises(ValueError):
        bernoulli_sum_moment_check(0, 3, 0.5, p=2.0, q=2.0)


def test_bernoulli_constant_stable_across_rates():
    ratios = []
    for y in (0.05, 0.1, 0.3):
        chk = bernoulli_sum_moment_check(8, 8, y, p=1.5, q=3.0,
                                         replications=20000, seed=13)
        ratios.append(chk.ratio)
    assert max(ratios) / min(ratios) <= 3.0, ratios


# ---------------------------------------------------------------------------
# moment growth experiment


def test_incomplete_moment_experiment_smoke():
    h = builtin_kernel("product", 2)
    report = incomplete_moment_experiment(
        h, Distribution.rademacher(),
        grid=[(16, 0.25), (32, 0.125)],
        p=2.0, q=2.0, d=2, replications=200, seed=31)
    assert report.kind == "incomplete-moment"
    assert len(report.rows) == 2
    assert report.passed
    for row in report.rows:
        assert row["bound_shape"] > 0
        assert row["moment_estimate"] >= 0


def test_incomplete_moment_experiment_validates():
    h = builtin_kernel("product", 2)
    d = Distribution.rademacher()
    with pytest.raises(ValueError):
        incomplete_moment_experiment(h, d, [(16, 0.5)], p=1.0, q=2.0, d=2)
    with pytest.raises(ValueError):
        incomplete_moment_experiment(h, d, [(16, 0.5)], p=2.0, q=2.0, d=3)
    with pytest.raises(ValueError):
        incomplete_moment_experiment(h, d, [(1, 0.5)], p=2.0, q=2.0, d=2)
    with pytest.raises(ValueError):
        incomplete_moment_experiment(h, d, [(16, 2.0)], p=2.0, q=2.0, d=2)
    # certification catches a wrong degeneracy claim
    s = builtin_kernel("sum", 2)
    with pytest.raises(ValueError):
        incomplete_moment_experiment(s, d, [(16, 0.5)], p=2.0, q=2.0, d=2,
                                     replications=10)


def test_incomplete_moment_thread_count_invariance():
    h = builtin_kernel("product", 2)
    kwargs = dict(grid=[(16, 0.25)], p=2.0, q=2.0, d=2,
                  replications=50, seed=41)
    r1 = incomplete_moment_experiment(h, Distribution.rademacher(),
                                      threads=1, **kwargs)
    r8 = incomplete_moment_experiment(h, Distribution.rademacher(),
                                      threads=8, **kwargs)
    assert r1.rows == r8.rows
