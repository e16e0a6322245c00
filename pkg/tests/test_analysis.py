import numpy as np
import pytest

from kredfactor.analysis import (
    diffusion_indexes,
    mr2_table,
    r2_by_k,
    r2_ranking,
    scree_data,
    top_n,
)
from kredfactor.engine import EigenDecomposition, FactorModel, decompose, estimate_factors
from kredfactor.panel import Panel, SeriesMeta, standardize
from oracles import low_rank_panel, r2_projection


def _z(values, names=None, groups=None):
    values = np.asarray(values, dtype=float)
    q, T = values.shape
    names = names or [f"S{i:02d}" for i in range(q)]
    groups = groups or [0] * q
    meta = tuple(SeriesMeta(id=i + 1, mnemonic=n, tcode=1, group=g)
                 for i, (n, g) in enumerate(zip(names, groups)))
    dates = tuple((2000 + t // 12, t % 12 + 1) for t in range(T))
    return standardize(Panel(dates=dates, meta=meta, values=values))


@pytest.fixture
def fitted():
    rng = np.random.default_rng(21)
    z = _z(low_rank_panel(rng, 25, 90, 3, noise=0.8))
    return z, estimate_factors(z, 4)


# --------------------------------------------------------------------------- R^2


def test_series_equal_to_factor_one(fitted):
    z, m = fitted
    y = np.vstack([m.factors[0], z.values[1:]])
    z2 = _z(y)
    assert r2_by_k(z2, m, 0, 1) == pytest.approx(1.0, abs=1e-12)


def test_series_orthogonal_to_factors(fitted):
    z, m = fitted
    f = m.factors
    x = np.random.default_rng(1).standard_normal(z.T)
    x -= x.mean()
    x -= f.T @ np.linalg.solve(f @ f.T, f @ x)
    z2 = _z(np.vstack([x, z.values[1:]]))
    assert r2_by_k(z2, m, 0, 4) == pytest.approx(0.0, abs=1e-12)


def test_r2_matches_projection_oracle(fitted):
    z, m = fitted
    for i in range(z.q):
        for k in range(1, m.r + 1):
            assert r2_by_k(z, m, i, k) == pytest.approx(
                r2_projection(z.values[i], m.factors, k), abs=1e-10)


def test_r2_k_out_of_range(fitted):
    z, m = fitted
    with pytest.raises(ValueError):
        r2_by_k(z, m, 0, 5)


def test_uncentred_factors_rejected(fitted):
    z, m = fitted
    shifted = FactorModel(m.r, m.loadings, m.factors + 1.0, m.residuals, m.eigenvalues)
    with pytest.raises(ValueError, match="mean-zero"):
        mr2_table(z, shifted)


def test_mr2_table_invariants(fitted):
    z, m = fitted
    t = mr2_table(z, m)
    assert t.r2.shape == (z.q, 4)
    assert np.all(t.r2 >= -1e-12) and np.all(t.r2 <= 1 + 1e-12)
    assert np.all(np.diff(t.r2, axis=1) >= -1e-12)
    np.testing.assert_array_equal(t.mr2[:, 0], t.r2[:, 0])
    np.testing.assert_allclose(t.mr2.sum(axis=1), t.r2[:, -1], rtol=0, atol=1e-14)
    assert t.total == pytest.approx(t.r2[:, -1].mean())


@pytest.mark.parametrize("seed", range(5))
def test_average_mr2_equals_eigen_share(seed):
    rng = np.random.default_rng(100 + seed)
    z = _z(low_rank_panel(rng, 15 + seed, 40 + 7 * seed, 2, noise=1.0))
    e = decompose(z)
    m = estimate_factors(z, 5, eig=e)
    t = mr2_table(z, m)
    # regression path against the spectrum path
    np.testing.assert_allclose(t.average_mr2, e.eigenvalues[:5] / z.q, rtol=0, atol=1e-8)
    cum = np.cumsum(e.eigenvalues) / e.eigenvalues.sum()
    np.testing.assert_allclose(t.r2.mean(axis=0), cum[:5], rtol=0, atol=1e-8)


# --------------------------------------------------------------------------- rankings


def test_top_n_full_permutation(fitted):
    z, m = fitted
    t = mr2_table(z, m)
    ranked = top_n(t, 2, z.q)
    assert sorted(s.mnemonic for s in ranked) == sorted(z.mnemonics)
    values = [s.value for s in ranked]
    assert values == sorted(values, reverse=True)


def test_planted_copy_ranks_first(fitted):
    z, m = fitted
    k = 3
    y = np.array(z.values)
    y[7] = m.factors[k - 1]
    # regress on the original factors, of which row 7 is now an exact copy
    t = mr2_table(_z(y), m)
    best = top_n(t, k, 1)[0]
    assert best.mnemonic == "S07"
    assert best.value == pytest.approx(1.0, abs=1e-10)


def test_rank_ties_broken_by_mnemonic():
    rng = np.random.default_rng(3)
    base = rng.standard_normal(30)
    other = rng.standard_normal((2, 30))
    z = _z(np.vstack([base, base, other]), names=["ZED", "ALPHA", "M1", "M2"])
    t = mr2_table(z, estimate_factors(z, 1))
    first_two = [s.mnemonic for s in top_n(t, 1, 2)]
    assert first_two == ["ALPHA", "ZED"]


def test_r2_ranking_counts_threshold(fitted):
    z, m = fitted
    t = mr2_table(z, m)
    ranking, over = r2_ranking(t)
    assert over == int(np.sum(t.r2[:, -1] > 0.5))
    assert [s.value for s in ranking] == sorted(t.r2[:, -1], reverse=True)


def test_single_factor_exact_panel_full_r2():
    rng = np.random.default_rng(5)
    z = _z(low_rank_panel(rng, 8, 30, 1))
    t = mr2_table(z, estimate_factors(z, 1))
    ranking, over = r2_ranking(t)
    assert all(s.value == pytest.approx(1.0, abs=1e-12) for s in ranking)
    assert over == 8


def test_permuting_series_permutes_outputs():
    rng = np.random.default_rng(8)
    y = low_rank_panel(rng, 12, 50, 2, noise=0.7)
    names = [f"N{i:02d}" for i in range(12)]
    perm = rng.permutation(12)
    z1 = _z(y, names)
    z2 = _z(y[perm], [names[i] for i in perm])
    t1 = mr2_table(z1, estimate_factors(z1, 3))
    t2 = mr2_table(z2, estimate_factors(z2, 3))
    np.testing.assert_allclose(t2.r2, t1.r2[perm], atol=1e-10)
    a = [(s.mnemonic, round(s.value, 9)) for s in r2_ranking(t1)[0]]
    b = [(s.mnemonic, round(s.value, 9)) for s in r2_ranking(t2)[0]]
    assert a == b


# --------------------------------------------------------------------------- diffusion


def _model_with_factors(f):
    f = np.asarray(f, dtype=float)
    return FactorModel(f.shape[0], np.zeros((1, f.shape[0])), f, np.zeros((1, f.shape[1])), np.ones(1))


def test_diffusion_zero_factor():
    di = diffusion_indexes(_model_with_factors(np.zeros((1, 6))))
    np.testing.assert_array_equal(di.values, np.zeros((1, 6)))


def test_diffusion_constant_factor():
    di = diffusion_indexes(_model_with_factors(np.ones((1, 5))))
    np.testing.assert_array_equal(di.values[0], [1, 2, 3, 4, 5])


def test_diffusion_round_trip_bit_exact(fitted):
    _, m = fitted
    di = diffusion_indexes(m)
    assert di.differences().tobytes() == m.factors.tobytes()
    assert di.dates == m.dates
    # float view agrees with a plain running sum to rounding
    np.testing.assert_allclose(di.values, np.cumsum(m.factors, axis=1), rtol=0, atol=1e-12)


# --------------------------------------------------------------------------- scree


def test_scree_identity_covariance():
    rows = scree_data(EigenDecomposition(np.ones(4), np.eye(4)))
    assert [r[2] for r in rows] == [0.25] * 4
    assert [r[3] for r in rows] == [0.25, 0.5, 0.75, 1.0]


def test_scree_rank_one():
    rng = np.random.default_rng(2)
    z = _z(low_rank_panel(rng, 6, 20, 1))
    rows = scree_data(decompose(z))
    assert rows[0][2] == pytest.approx(1.0, abs=1e-12)


def test_scree_cumulative(fitted):
    z, _ = fitted
    rows = scree_data(decompose(z))
    cum = [r[3] for r in rows]
    assert len(rows) == z.q
    assert all(b >= a for a, b in zip(cum, cum[1:]))
    assert cum[-1] == pytest.approx(1.0, abs=1e-10)
