import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from expander_ldr.data import SynthConfig, gen_synthetic
from expander_ldr.errors import AggregationError, ParameterError
from expander_ldr.expander import sample_expander
from expander_ldr.robust_agg import (aggregate_blocks, block_means, geometric_median, mom_median,
                                     partition_blocks, robust_aggregate)
from expander_ldr.sketch import BucketStats, all_bucket_moments, assign_buckets
from oracles import grid_geometric_median, sorted_median

finite = st.floats(-1e6, 1e6, allow_nan=False)


# --- partition ----------------------------------------------------------------------


@pytest.mark.parametrize("n,size,expect", [(10, 10, [10]), (10, 3, [3, 3, 3, 1])])
def test_block_sizes(n, size, expect):
    part = partition_blocks(range(n), size)
    assert [len(b) for b in part.blocks] == expect
    assert sorted(np.concatenate(part.blocks).tolist()) == list(range(n))


def test_large_partition_is_exact_cover():
    part = partition_blocks(np.arange(8000), 16, (3, 2, 1))
    assert part.n_blocks == 500
    seen = np.zeros(8000, dtype=int)
    for b in part.blocks:
        seen[b] += 1
    assert np.all(seen == 1)


def test_partition_determinism_and_errors():
    a = partition_blocks(np.arange(50), 7, (1, 2, 3))
    b = partition_blocks(np.arange(50), 7, (1, 2, 3))
    assert all(np.array_equal(x, y) for x, y in zip(a.blocks, b.blocks))
    with pytest.raises(AggregationError):
        partition_blocks([], 4)
    with pytest.raises(ParameterError):
        partition_blocks([1, 2], 0)


def test_block_means():
    vals = np.arange(10.0)
    np.testing.assert_allclose(block_means(vals, [np.array([0, 1]), np.array([9]), np.array([2, 3, 4])]),
                               [0.5, 9.0, 3.0])


# --- coordinate-wise median ------------------------------------------------------------


def test_scalar_median_ignores_wild_value():
    assert mom_median([1.0, 2.0, 100.0]) == 2.0


def test_even_count_midpoint():
    np.testing.assert_array_equal(mom_median([np.zeros(2), np.ones(2)]), [0.5, 0.5])


def test_matrix_median_two_thirds_good():
    mats = [np.eye(3)] * 66 + [100 * np.eye(3)] * 33
    out = mom_median(mats, mode="matrix")
    np.testing.assert_array_equal(out, np.eye(3))
    np.testing.assert_array_equal(out, sorted_median(mats))


def test_median_shape_errors():
    with pytest.raises(ParameterError):
        mom_median([np.zeros(2), np.zeros(3)])
    with pytest.raises(ParameterError):
        mom_median([])
    with pytest.raises(ParameterError):
        mom_median([np.zeros((2, 3))], mode="matrix")
    with pytest.raises(ParameterError):
        mom_median([np.zeros(2)], mode="tensor")


@given(st.integers(1, 30).flatmap(lambda k: arrays(np.float64, (k, 3), elements=finite)))
def test_median_matches_sort_oracle(stack):
    np.testing.assert_array_equal(mom_median(list(stack)), sorted_median(stack))


@given(st.integers(1, 20).flatmap(lambda k: arrays(np.float64, (k, 3, 3), elements=finite)))
def test_matrix_median_is_symmetric(stack):
    out = mom_median(list(stack), mode="matrix")
    np.testing.assert_array_equal(out, out.T)


@given(arrays(np.float64, (4,), elements=finite), st.integers(0, 20), st.data())
def test_median_exact_with_majority(v, n_bad, data):
    n_good = n_bad + 1 + 2 * data.draw(st.integers(0, 5))
    if (n_good + n_bad) % 2 == 0:
        n_good += 1
    bad = data.draw(arrays(np.float64, (n_bad, 4), elements=finite))
    stack = np.vstack([np.tile(v, (n_good, 1)), bad])
    order = data.draw(st.permutations(range(stack.shape[0])))
    np.testing.assert_array_equal(mom_median(list(stack[list(order)])), v)


@given(st.integers(2, 25).flatmap(lambda k: arrays(np.float64, (k, 2), elements=st.floats(-100, 100))),
       st.randoms(use_true_random=False))
def test_permutation_invariance(points, rnd):
    perm = list(range(points.shape[0]))
    rnd.shuffle(perm)
    np.testing.assert_array_equal(mom_median(list(points)), mom_median(list(points[perm])))
    np.testing.assert_allclose(geometric_median(points), geometric_median(points[perm]), atol=1e-6)


@given(st.integers(3, 31), st.data())
def test_breakdown_stays_in_good_range(n_blocks, data):
    n_bad = data.draw(st.integers(0, (n_blocks - 1) // 2))
    good = data.draw(arrays(np.float64, (n_blocks - n_bad, 3), elements=st.floats(-10, 10)))
    bad = data.draw(arrays(np.float64, (n_bad, 3), elements=finite))
    out = mom_median(list(np.vstack([good, bad])))
    assert np.all(out >= good.min(axis=0)) and np.all(out <= good.max(axis=0))


# --- geometric median -----------------------------------------------------------------


def test_single_point():
    np.testing.assert_array_equal(geometric_median([np.array([3.0, -1.0])]), [3.0, -1.0])


def test_equilateral_triangle_centroid():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    np.testing.assert_allclose(geometric_median(tri), tri.mean(axis=0), atol=1e-6)


def test_matches_grid_oracle():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [10.0, 10.0]])
    ref = grid_geometric_median(pts, lo=(-1, -1), hi=(11, 11))
    np.testing.assert_allclose(geometric_median(pts), ref, atol=1e-2)


def test_point_on_data_vertex():
    # the minimiser is the data point at the origin; Vardi-Zhang keeps it there
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    np.testing.assert_allclose(geometric_median(pts), [0.0, 0.0], atol=1e-9)


def test_empty_input_rejected():
    with pytest.raises(ParameterError):
        geometric_median(np.zeros((0, 2)))


@given(st.integers(2, 30).flatmap(lambda k: arrays(np.float64, (k, 3), elements=st.floats(-100, 100))))
def test_weiszfeld_objective_non_increasing(points):
    _, hist = geometric_median(points, return_history=True)
    scale = 1e-9 * max(1.0, hist[0])
    assert all(b <= a + scale for a, b in zip(hist, hist[1:]))


# --- end-to-end aggregation -------------------------------------------------------------


@pytest.fixture(scope="module")
def clean_stats():
    ds = gen_synthetic(SynthConfig(n=5000, d=10, alpha=1.0))
    graphs = [sample_expander(5000, 1000, 2, (0, 0, t)) for t in range(8)]
    a = assign_buckets(ds.X, ds.y, graphs)
    H, g, c = all_bucket_moments(ds.X, ds.y, a)
    stats = {k: BucketStats(H[k], g[k], int(c[k])) for k in range(c.size) if c[k] > 0}
    return ds, stats


def test_identical_buckets_exact():
    H0 = np.array([[2.0, 0.5], [0.5, 1.0]])
    g0 = np.array([1.0, -1.0])
    stats = {k: BucketStats(H0, g0, 3) for k in range(37)}
    for mode in ("mom", "geometric"):
        rm = robust_aggregate(stats, block_size=4, mode=mode)
        np.testing.assert_allclose(rm.sigma_hat, H0, rtol=0, atol=1e-12 if mode == "geometric" else 0)
        np.testing.assert_allclose(rm.g_hat, g0, rtol=0, atol=1e-12 if mode == "geometric" else 0)


def test_empty_buckets_skipped_and_all_empty_rejected():
    stats = {0: BucketStats(np.eye(2), np.ones(2), 2), 1: BucketStats(np.zeros((2, 2)), np.zeros(2), 0)}
    rm = robust_aggregate(stats, block_size=1)
    np.testing.assert_array_equal(rm.sigma_hat, np.eye(2))
    with pytest.raises(AggregationError):
        robust_aggregate({1: stats[1]})
    with pytest.raises(ParameterError):
        aggregate_blocks(np.zeros((3, 2)), [np.arange(3)], mode="trimmed")


def test_clean_run_recovers_moments(clean_stats):
    ds, stats = clean_stats
    rm = robust_aggregate(stats)
    assert np.linalg.norm(rm.sigma_hat - np.eye(10), 2) < 0.2
    assert np.linalg.norm(rm.g_hat - ds.w_star) < 0.2


def _corrupt_blocks(stats, fraction, block_size):
    keys = sorted(stats)
    part = partition_blocks(np.arange(len(keys)), block_size)
    bad = dict(stats)
    for blk in part.blocks[:int(fraction * part.n_blocks)]:
        for i in blk:
            k = keys[i]
            bad[k] = BucketStats(1e6 * np.eye(10), stats[k].g, stats[k].count)
    return bad


def test_block_corruption_bounded(clean_stats):
    _, stats = clean_stats
    clean = robust_aggregate(stats).sigma_hat
    dev = np.linalg.norm(clean - np.eye(10), 2)
    hit = robust_aggregate(_corrupt_blocks(stats, 0.3, 16)).sigma_hat
    assert np.linalg.norm(hit - clean, 2) < 2 * dev
    geo = robust_aggregate(_corrupt_blocks(stats, 0.3, 16), mode="geometric").sigma_hat
    assert np.linalg.norm(geo - np.eye(10), 2) < 1.0


def test_result_independent_of_mapping_order(clean_stats):
    _, stats = clean_stats
    rev = {k: stats[k] for k in sorted(stats, reverse=True)}
    a, b = robust_aggregate(stats), robust_aggregate(rev)
    np.testing.assert_array_equal(a.sigma_hat, b.sigma_hat)
    np.testing.assert_array_equal(a.g_hat, b.g_hat)
