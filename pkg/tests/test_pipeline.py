import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expander_ldr import _rng
from expander_ldr import pipeline as pl
from expander_ldr.data import SynthConfig, evaluate, gen_synthetic, gen_synthetic_split
from expander_ldr.errors import DegenerateStateError, IndefiniteMomentsError, ParameterError
from expander_ldr.pipeline import (CandidateList, PipelineConfig, candidate_list_to_dict, run_list, run_seed,
                                   select_best, target_level, target_variance)
from expander_ldr.sketch import all_bucket_moments, residual_matrices

SMALL = PipelineConfig(alpha=0.5, n_buckets=50, repetitions=4, seeds=3)


def _small_data(n=600, d=4, alpha=0.5, seed=0):
    return gen_synthetic(SynthConfig(n=n, d=d, alpha=alpha, seed=seed))


# --- configuration -----------------------------------------------------------------


def test_defaults():
    c = PipelineConfig()
    assert (c.n_buckets, c.degree, c.repetitions, c.seeds, c.filter_rounds) == (1000, 2, 8, 10, 7)
    assert (c.lam, c.eta, c.rho, c.delta_radius) == (1e-3, 0.10, 0.50, 0.0)


@pytest.mark.parametrize("kw", [dict(alpha=0), dict(alpha=1.2), dict(n_buckets=0), dict(degree=3, n_buckets=2),
                                dict(rho=1.0), dict(rho=0.0), dict(eta=0.0), dict(lam=-1.0),
                                dict(filter_rounds=-1), dict(aggregation_mode="mean"), dict(master_seed=-1)])
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        PipelineConfig(**kw)


def test_target_level():
    assert target_level(0.3, 10) == 0.5
    assert target_level(1.0, 10) == 1.0
    assert target_level(0.99, 10) == pytest.approx(0.99 ** 10)
    assert target_level(0.9, 10) == 0.5
    with pytest.raises(ParameterError):
        target_level(0.0, 10)


# --- target variance -----------------------------------------------------------------


def test_target_of_identical_buckets():
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    v = np.array([0.6, 0.8])
    assert target_variance(np.stack([M] * 9), v) == pytest.approx(v @ M @ v, rel=1e-15)


def test_target_with_scaled_minority():
    rng = np.random.default_rng(0)
    mats = np.stack([np.diag(rng.uniform(1, 2, 3)) for _ in range(101)])
    v = np.ones(3) / np.sqrt(3)
    clean = np.einsum("kij,i,j->k", mats, v, v)
    mats[:50] *= 1e6
    t = target_variance(mats, v)
    assert clean[50:].min() <= t <= clean[50:].max()


def test_target_errors():
    with pytest.raises(ParameterError):
        target_variance(np.zeros((0, 2, 2)), np.ones(2))
    with pytest.raises(ParameterError):
        target_variance(np.zeros((3, 2, 2)), np.ones(2), level=0.0)


def test_clean_target_tracks_noise_level():
    cfg = PipelineConfig(alpha=1.0)
    train = gen_synthetic(SynthConfig(alpha=1.0, d=20, seed=3))
    cand = run_seed(train.X, train.y, cfg, 1)
    a = pl.sketch_seed(train.X, train.y, cfg, 1)
    _, _, counts = all_bucket_moments(train.X, train.y, a)
    keys = np.flatnonzero(counts > 0)
    C = residual_matrices(train.X, train.y, a, cand.ell_hat, keys)
    v = np.ones(20) / np.sqrt(20)
    ref = 0.1 ** 2 * (v @ v)
    assert ref / 3 <= target_variance(C, v) <= 3 * ref


# --- single seed -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def clean_run():
    train, test = gen_synthetic_split(SynthConfig(alpha=1.0))
    return train, test, run_seed(train.X, train.y, PipelineConfig(alpha=1.0), 1)


def test_clean_data_accuracy_and_early_exit(clean_run):
    train, _, cand = clean_run
    assert np.linalg.norm(cand.ell_hat - train.w_star) < 0.1
    assert cand.rounds_used == 0 and len(cand.history) == 1
    assert cand.active_bucket_count == 8000


def test_noise_free_fixed_point():
    ds = gen_synthetic(SynthConfig(n=2000, d=5, alpha=1.0, noise_sigma=0.0, seed=4))
    # one block: the median is the mean and g = H w* survives aggregation
    cfg = PipelineConfig(alpha=1.0, n_buckets=100, lam=0.0, seeds=1, block_size=10**6)
    cand = run_seed(ds.X, ds.y, cfg, 1)
    np.testing.assert_allclose(cand.ell_hat, ds.w_star, rtol=1e-10, atol=1e-10)
    assert cand.final_top_eigenvalue < 1e-18


def test_noise_free_with_blocks_is_close():
    # separate coordinate medians of H and g do not commute with w*, so only approximately
    ds = gen_synthetic(SynthConfig(n=2000, d=5, alpha=1.0, noise_sigma=0.0, seed=4))
    cand = run_seed(ds.X, ds.y, PipelineConfig(alpha=1.0, n_buckets=100, lam=0.0, seeds=1), 1)
    assert np.linalg.norm(cand.ell_hat - ds.w_star) < 0.1 * np.linalg.norm(ds.w_star)


def test_pruning_schedule():
    ds = _small_data(alpha=0.3)
    cfg = SMALL.replace(alpha=0.3, filter_rounds=5, rho=0.3)
    cand = run_seed(ds.X, ds.y, cfg, 2)
    active = [h["active"] for h in cand.history] + [cand.active_bucket_count]
    for prev, cur in zip(active, active[1:cand.rounds_used + 1]):
        assert cur == prev - math.ceil(0.3 * prev)
    assert cand.active_bucket_count >= (1 - 0.3) ** cand.rounds_used * active[0] - cand.rounds_used


def test_filter_round_budget():
    ds = _small_data(alpha=0.3)
    for T in (0, 1, 3):
        cand = run_seed(ds.X, ds.y, SMALL.replace(alpha=0.3, filter_rounds=T), 1)
        assert cand.rounds_used <= T and len(cand.history) <= T
    assert math.isnan(run_seed(ds.X, ds.y, SMALL.replace(filter_rounds=0), 1).final_top_eigenvalue)


def test_first_prune_lowers_top_eigenvalue():
    # sparse high-leverage outliers land in a minority of buckets
    hits = total = 0
    for s in range(4):
        rng = _rng.make_rng(_rng.DATA, 100 + s)
        X = rng.standard_normal((3000, 10))
        w = rng.standard_normal(10)
        y = X @ w + 0.1 * rng.standard_normal(3000)
        out = rng.permutation(3000)[:90]
        X[out] *= 10.0
        y[out] = rng.uniform(-20, 20, out.size)
        cfg = PipelineConfig(alpha=0.97, n_buckets=300, seeds=3, master_seed=s)
        for i in (1, 2, 3):
            lm = [h["lambda_max"] for h in run_seed(X, y, cfg, i).history]
            if len(lm) > 1:
                total += 1
                hits += lm[1] <= lm[0]
    assert total >= 8 and hits >= 0.9 * total


def test_degenerate_state_when_everything_would_be_pruned(monkeypatch):
    # a target below every score keeps the filter pruning: 4 -> 2 -> 1 -> nothing left
    monkeypatch.setattr(pl, "_score_quantile", lambda scores, level: -1.0)
    ds = _small_data(n=200, alpha=0.3)
    cfg = PipelineConfig(alpha=0.3, n_buckets=4, repetitions=1, degree=1, filter_rounds=5, block_size=1)
    with pytest.raises(DegenerateStateError):
        run_seed(ds.X, ds.y, cfg, 1)


def test_indefinite_moments_escalate_lambda():
    ell = pl._solve(np.diag([1.0, -0.5]), np.ones(2), 0.0, 1)
    lam = np.linalg.norm(np.diag([1.0, -0.5]))
    np.testing.assert_allclose(ell, [1 / (1 + lam), 1 / (lam - 0.5)])
    with pytest.raises(IndefiniteMomentsError):
        pl._solve(np.diag([0.0, -1.0]), np.ones(2), 0.0, 1)


# --- candidate list -------------------------------------------------------------------


def test_single_seed_list():
    ds = _small_data()
    res = run_list(ds.X, ds.y, SMALL.replace(seeds=1))
    assert len(res) == 1 and len(res.candidates) == 1


def test_identical_candidates_collapse():
    ds = gen_synthetic(SynthConfig(n=1000, d=3, alpha=1.0, noise_sigma=0.0, seed=2))
    res = run_list(ds.X, ds.y, SMALL.replace(alpha=1.0, lam=0.0, delta_radius=1e-6, block_size=10**6))
    assert len(res) == 1


def test_list_is_deterministic():
    ds = _small_data(alpha=0.3)
    a, b = run_list(ds.X, ds.y, SMALL), run_list(ds.X, ds.y, SMALL)
    assert a.centers.tobytes() == b.centers.tobytes()
    assert [c.history for c in a.candidates] == [c.history for c in b.candidates]


@settings(max_examples=8)
@given(st.integers(0, 1000), st.integers(1, 5), st.floats(0, 2))
def test_list_size_bounds(seed, R, radius):
    ds = _small_data(n=400, alpha=0.4, seed=seed)
    res = run_list(ds.X, ds.y, SMALL.replace(seeds=R, delta_radius=radius, master_seed=seed))
    assert 1 <= len(res) <= R
    if radius == 0:
        distinct = {c.ell_hat.tobytes() for c in res.candidates}
        assert len(res) == len(distinct)


def test_seed_order_does_not_matter():
    ds = _small_data(alpha=0.3)
    listed = run_list(ds.X, ds.y, SMALL)
    backwards = [run_seed(ds.X, ds.y, SMALL, s) for s in (3, 2, 1)]
    assert {c.ell_hat.tobytes() for c in listed.candidates} == {c.ell_hat.tobytes() for c in backwards}


def test_all_seeds_failing(monkeypatch):
    def boom(*a, **k):
        raise DegenerateStateError("forced")
    monkeypatch.setattr(pl, "run_seed", boom)
    ds = _small_data()
    with pytest.raises(DegenerateStateError):
        run_list(ds.X, ds.y, SMALL)


def test_some_seeds_failing(monkeypatch):
    real = pl.run_seed

    def flaky(X, y, cfg, s, _design=None):
        if s == 2:
            raise DegenerateStateError("forced")
        return real(X, y, cfg, s, _design=_design)
    monkeypatch.setattr(pl, "run_seed", flaky)
    ds = _small_data()
    res = run_list(ds.X, ds.y, SMALL)
    assert [c.seed_index for c in res.candidates] == [1, 3]


# --- selection and serialisation ---------------------------------------------------------


def test_select_single_and_exact():
    w = np.array([1.0, 2.0])
    X = np.random.default_rng(0).standard_normal((30, 2))
    np.testing.assert_array_equal(select_best(np.array([[5.0, 5.0]]), X, X @ w), [5.0, 5.0])
    cands = np.array([[0.0, 0.0], w, [3.0, -1.0]])
    np.testing.assert_array_equal(select_best(cands, X, X @ w), w)
    with pytest.raises(ParameterError):
        select_best(np.zeros((0, 2)), X, X @ w)


def test_list_beats_single_seed_at_low_alpha():
    train, test = gen_synthetic_split(SynthConfig(alpha=0.3, seed=1))
    res = run_list(train.X, train.y, PipelineConfig(alpha=0.3, master_seed=1))
    best = evaluate(select_best(res, test.X, test.y), test).test_mse
    single = evaluate(res.candidates[0].ell_hat, test).test_mse
    assert best <= single


def test_dict_is_json_safe():
    import json
    ds = _small_data()
    cfg = SMALL.replace(filter_rounds=0)
    payload = candidate_list_to_dict(cfg, run_list(ds.X, ds.y, cfg))
    text = json.dumps(payload, allow_nan=False)
    assert json.loads(text)["candidates"][0]["final_top_eigenvalue"] is None
    assert payload["config"]["n_buckets"] == 50
