import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shiftlab.densities import HorizonError
from shiftlab.pseudoshift import (
    CoefficientOverflow, FiniteVec, IndexMap, LogProduct, PseudoShift, Space, WeightSeq,
    apply_power, extract_weighted_shift, extraction_map, inverse_iterate, iterate,
    summability_tail, weight_product,
)

seeds = st.integers(0, 2**32 - 1)


def random_weights(rng, size=400):
    mags = rng.uniform(0.05, 20, size)
    return (mags * rng.choice([-1.0, 1.0], size)).tolist()


def random_table(rng, size=2000):
    return (1 + np.cumsum(rng.integers(1, 3, size))).tolist()


def direct_iterate(table, n, j):
    for _ in range(n):
        j = table[j - 1]
    return j


def direct_product(w, path):
    return math.prod(w[i - 1] for i in path)


def test_iterate_examples():
    assert iterate(IndexMap.affine(1), 7, 3) == 10
    assert iterate(IndexMap.affine(2), 5, 1) == 11
    assert iterate(IndexMap.tabulated([2, 4, 8]), 0, 3) == 3
    assert inverse_iterate(IndexMap.affine(1), 4, 9) == 5
    assert inverse_iterate(IndexMap.affine(2), 3, 5) is None
    assert inverse_iterate(IndexMap.tabulated([2, 4, 8, 16]), 1, 3) is None


def test_index_map_validation():
    with pytest.raises(ValueError):
        IndexMap.tabulated([1, 2, 3])
    with pytest.raises(ValueError):
        IndexMap.tabulated([2, 2, 3])
    with pytest.raises(ValueError):
        IndexMap.affine(0)
    with pytest.raises(HorizonError):
        IndexMap.tabulated([2, 3]).iterate(3, 1)


@given(seeds, st.integers(0, 4), st.integers(1, 8))
def test_iterate_and_preimages(seed, n, j):
    table = random_table(np.random.default_rng(seed))
    f = IndexMap.tabulated(table)
    k = direct_iterate(table, n, j)
    assert f.iterate(n, j) == k
    assert f.inverse_iterate(n, k) == j
    assert int(f.images(n, [j])[0]) == k
    ks = np.arange(1, table[-1] + 1)
    pre = f.preimages(1, ks)
    for kk, p in zip(ks.tolist(), pre.tolist()):
        assert p == (table.index(kk) + 1 if kk in table else 0)


def test_log_product_arithmetic():
    a = LogProduct.from_value(-4.0)
    b = LogProduct.from_value(0.5)
    assert (a * b).value() == pytest.approx(-2.0)
    assert (a / b).value() == pytest.approx(-8.0)
    assert a.reciprocal().value() == pytest.approx(-0.25)
    with pytest.raises(CoefficientOverflow):
        LogProduct(1000.0).value()
    with pytest.raises(ValueError):
        LogProduct.from_value(0.0)


def test_weight_product_examples():
    T = PseudoShift.scaled_power(2.0, 1)
    assert weight_product(T, 1, 10).log_abs == pytest.approx(10 * math.log(2))
    assert weight_product(T, 1, 0) == LogProduct(0.0, 1)
    big = weight_product(T, 1, 10_000)
    assert big.log_abs == pytest.approx(10_000 * math.log(2))


@given(seeds, st.integers(1, 3), st.integers(1, 30), st.integers(0, 100))
def test_weight_product_matches_fsum_oracle(seed, r, l, n):
    w = random_weights(np.random.default_rng(seed))
    T = PseudoShift(IndexMap.affine(r), WeightSeq.from_values(w))
    path = [l + r * m for m in range(1, n + 1)]
    lp = weight_product(T, l, n)
    assert lp.log_abs == math.fsum(math.log(abs(w[i - 1])) for i in path)
    assert lp.sign == (-1 if sum(w[i - 1] < 0 for i in path) % 2 else 1)
    logs, sg = T.log_products(np.array([l]), n)
    assert logs[0] == pytest.approx(lp.log_abs, abs=1e-9)
    assert int(sg[0]) == lp.sign
    path_logs, path_sg = T.path_logs(l, n)
    assert path_logs[-1] == pytest.approx(lp.log_abs, abs=1e-9)
    assert int(path_sg[-1]) == lp.sign


@given(seeds, st.integers(1, 8), st.integers(0, 4))
def test_tabulated_products(seed, l, n):
    rng = np.random.default_rng(seed)
    table, w = random_table(rng), random_weights(rng, 4100)
    T = PseudoShift(IndexMap.tabulated(table), WeightSeq.from_values(w))
    path, j = [], l
    for _ in range(n):
        j = table[j - 1]
        path.append(j)
    assert weight_product(T, l, n).value() == pytest.approx(direct_product(w, path), rel=1e-12)
    logs, sg = T.log_products(np.array([l]), n)
    assert sg[0] * math.exp(logs[0]) == pytest.approx(direct_product(w, path), rel=1e-12)


def test_weight_horizon():
    T = PseudoShift.weighted_shift(WeightSeq.from_values([2.0] * 10))
    weight_product(T, 1, 9)
    with pytest.raises(HorizonError):
        weight_product(T, 1, 10)


def test_apply_power_examples():
    T = PseudoShift.scaled_power(2.0, 1)
    y = apply_power(T, FiniteVec.basis(5), 4)
    assert y.to_dict() == pytest.approx({1: 16.0})
    x = FiniteVec.from_dict({3: 1.5, 7: -2.0})
    assert apply_power(T, x, 0) is x
    w = [2.0, 3.0] * 10
    Tw = PseudoShift.weighted_shift(WeightSeq.from_values(w))
    y = apply_power(Tw, FiniteVec.basis(4), 3)
    assert y.to_dict() == pytest.approx({1: w[1] * w[2] * w[3]})
    assert len(apply_power(T, FiniteVec.basis(3), 5)) == 0


def test_apply_power_overflow():
    T = PseudoShift.scaled_power(10.0, 1)
    with pytest.raises(CoefficientOverflow) as info:
        apply_power(T, FiniteVec.basis(500), 400)
    assert info.value.log_abs == pytest.approx(400 * math.log(10))
    y = apply_power(T, FiniteVec.basis(500), 400, check_overflow=False)
    assert y.max_log() == pytest.approx(400 * math.log(10))


@given(seeds, st.integers(1, 3), st.integers(0, 5),
       st.dictionaries(st.integers(1, 60), st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3),
                       min_size=1, max_size=8))
def test_apply_power_is_iterated_single_steps(seed, r, n, entries):
    w = random_weights(np.random.default_rng(seed))
    T = PseudoShift(IndexMap.affine(r), WeightSeq.from_values(w))
    x = FiniteVec.from_dict(entries)
    y = x
    for _ in range(n):
        y = apply_power(T, y, 1)
    assert apply_power(T, x, n).allclose(y, rel=1e-9)
    # brute force on dense coordinates
    expect = {}
    for k, v in entries.items():
        j = k - n * r
        if j >= 1:
            expect[j] = v * direct_product(w, [j + r * m for m in range(1, n + 1)])
    got = apply_power(T, x, n).to_dict()
    assert set(got) == set(expect)
    for k in expect:
        assert got[k] == pytest.approx(expect[k], rel=1e-9)


def test_finite_vec_ops_and_norms():
    x = FiniteVec.from_dict({1: 3.0, 4: -4.0})
    assert x.norm(Space.lp(2)) == pytest.approx(5.0)
    assert x.norm(Space.lp(1)) == pytest.approx(7.0)
    assert x.norm(Space.c0()) == pytest.approx(4.0)
    z = x - x
    assert len(z) == 0 and z.norm(Space.lp()) == 0.0
    s = x + FiniteVec.basis(2, 1.0)
    assert s.support == (1, 2, 4)
    assert s.coefficient(4) == pytest.approx(-4.0) and s.coefficient(3) == 0.0
    assert FiniteVec.from_config(s.to_config()).identical(s)
    assert x.restrict(2, 10).support == (4,)
    with pytest.raises(ValueError):
        FiniteVec.from_dict({0: 1.0})


@given(st.lists(st.floats(-1e3, 1e3).filter(lambda v: abs(v) > 1e-6), min_size=1, max_size=30),
       st.sampled_from([1.0, 2.0, 3.0]))
def test_lp_norm_matches_numpy(vals, p):
    x = FiniteVec.from_values(vals)
    assert x.norm(Space.lp(p)) == pytest.approx(np.linalg.norm(vals, ord=p), rel=1e-12)


def test_extraction_examples():
    w = list(range(1, 41))
    Ws = WeightSeq.from_values([float(v) for v in w])
    v = extract_weighted_shift(PseudoShift.weighted_shift(Ws), 1)
    assert np.array_equal(v.log_table, Ws.log_table)
    T2 = PseudoShift(IndexMap.affine(2), Ws)
    v1 = extract_weighted_shift(T2, 1).values()
    v2 = extract_weighted_shift(T2, 2).values()
    # v_n = w_{f^(n-1)(j)}
    assert v1 == pytest.approx([float(w[2 * n - 2]) for n in range(1, 21)])
    assert v2 == pytest.approx([float(w[2 * n - 1]) for n in range(1, 21)])


@given(seeds, st.integers(1, 5), st.data())
def test_quasi_conjugacy(seed, j, data):
    rng = np.random.default_rng(seed)
    table = random_table(rng)
    w = random_weights(rng, 4100)
    T = PseudoShift(IndexMap.tabulated(table), WeightSeq.from_values(w[:table[-1]]))
    Bv = PseudoShift.weighted_shift(extract_weighted_shift(T, j))
    orbit = [j]
    while orbit[-1] <= len(table) and table[orbit[-1] - 1] <= table[-1]:
        orbit.append(table[orbit[-1] - 1])
    coords = data.draw(st.lists(st.sampled_from(orbit[1:] + list(range(1, 30))), min_size=1, max_size=8))
    x = FiniteVec.from_dict({c: float(i + 1) for i, c in enumerate(coords)})
    left = extraction_map(T, j, apply_power(T, x, 1))
    right = apply_power(Bv, extraction_map(T, j, x), 1)
    assert left.identical(right)


def test_summability_tail():
    T = PseudoShift.scaled_power(2.0, 1)
    s, last = summability_tail(T, 1, 1, 50)
    assert s == pytest.approx((1 - 4.0 ** -50) / 3, rel=1e-12)
    assert last == pytest.approx(4.0 ** -50)
    s, _ = summability_tail(PseudoShift.scaled_power(1.0, 1), 1, 3, 40)
    assert s == 38
    with pytest.raises(ValueError):
        summability_tail(T, 1, 5, 4)
    with pytest.raises(ValueError):
        summability_tail(T.with_space(Space.c0()), 1, 1, 4)


def test_config_round_trips():
    for T in [PseudoShift.scaled_power(-2.5, 3, Space.c0()),
              PseudoShift(IndexMap.tabulated([2, 5, 9]), WeightSeq.from_values([1.0, -2.0, 0.5] * 4)),
              PseudoShift.weighted_shift(WeightSeq.from_logs([-800.0, 1.0], [1, -1]))]:
        back = PseudoShift.from_config(T.to_config())
        assert back.to_config() == T.to_config()
        assert back.space == T.space
    with pytest.raises(ValueError):
        WeightSeq.constant(0.0)
    with pytest.raises(ValueError):
        Space.lp(0.5)
