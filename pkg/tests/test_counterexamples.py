import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftlab.criterion import TargetGrid, default_grid
from shiftlab.densities import density_report
from shiftlab.pseudoshift import PseudoShift, WeightSeq, weight_product
from shiftlab.setconstruct import verify_separation
from shiftlab.counterexamples import (
    PowersConfig, Thm41Config, Thm42Config, block_hitting_set, block_read_violations,
    default_alpha, diagonal_pairs, gen_powers_ld_set, gen_powers_scaffold, gen_thm41, gen_thm42,
    ratio_identity_error, scaffold_intervals, thm41_growth_violations, thm42_hitting_set,
    verify_ratio_band, weights_from_generator, z_band_violations,
)


def ratio_value(v, w, n):
    """W^2_{1,n} / W^1_{1,n} from factor-by-factor products."""
    r = weight_product(PseudoShift.weighted_shift(w), 1, n) / \
        weight_product(PseudoShift.weighted_shift(v), 1, n)
    return r.sign * math.exp(r.log_abs)


@pytest.fixture(scope="module")
def thm41():
    cfg = Thm41Config(4)
    v, w = gen_thm41(cfg, 20_000)
    return cfg, v, w


def test_thm41_ratio_identity(thm41):
    cfg, v, w = thm41
    for l in range(1, 5):
        y = cfg.grid.coefficients(l)[0]
        for i in range(1, l + 1):
            assert ratio_value(v, w, cfg.n_of(l) + i - 1) == pytest.approx(y[i - 1], rel=1e-9)
    assert ratio_identity_error(v, w, cfg.offsets, cfg.patterns)["pass"]


def test_thm41_weight_structure(thm41):
    cfg, v, w = thm41
    mags = np.abs(v.values())
    assert np.all(mags <= 2.0)
    allowed = {1.0, 2.0}
    for l in range(1, 5):
        y = cfg.grid.coefficients(l)[0]
        allowed |= {abs(y[j - 1] / y[j]) for j in range(1, l)}
    assert all(any(math.isclose(m, a, rel_tol=1e-12) for a in allowed) for m in set(mags.tolist()))
    # coupling weights
    coupling = {l: abs(w.value(cfg.n_of(l) + 1)) for l in range(2, 5)}
    assert coupling[2] <= 2 * (2 / 3) ** 89 * (1 + 1e-9)
    assert coupling[2] < 1e-15
    assert all(c < 1e-10 for c in coupling.values())
    assert np.max(np.abs(w.values())) <= 3 + max(coupling.values())


def test_thm41_growth_and_band(thm41):
    cfg, v, w = thm41
    assert thm41_growth_violations(cfg, v, 20_000) == []
    inside, rep = verify_ratio_band(v, w, cfg.offsets, 0.5, 10_000)
    assert rep["ok"]
    assert float(density_report(inside, 10_000, 1000).prefix_upper) <= 0.01


def test_thm41_horizon_and_determinism(thm41):
    cfg, v, w = thm41
    with pytest.raises(ValueError):
        gen_thm41(cfg, cfg.min_horizon - 1)
    v2, w2 = gen_thm41(Thm41Config(4), 20_000)
    assert np.array_equal(v.log_table, v2.log_table) and np.array_equal(w.log_table, w2.log_table)
    with pytest.raises(ValueError):
        Thm41Config(4, default_grid(3, 1))


@given(st.integers(0, 10_000))
@settings(max_examples=15)
def test_thm41_identity_for_random_grids(seed):
    rng = np.random.default_rng(seed)
    rows = []
    for l in range(1, 4):
        mags = np.exp(rng.uniform(-math.log(l), math.log(l), l)) if l > 1 else np.ones(1)
        rows.append((mags * rng.choice([-1.0, 1.0], l)).tolist())
    cfg = Thm41Config(3, TargetGrid.from_rows(rows))
    v, w = gen_thm41(cfg, 2000)
    assert np.all(np.abs(v.values()) <= 2.0)
    for l in range(1, 4):
        for i in range(1, l + 1):
            assert ratio_value(v, w, cfg.n_of(l) + i - 1) == pytest.approx(rows[l - 1][i - 1], rel=1e-9)


def test_ratio_band_trivial_cases():
    H = 500
    same = WeightSeq.from_values([2.0] * (H + 1))
    inside, rep = verify_ratio_band(same, same, [10, 100], 0.5, H)
    assert len(inside) == H and not rep["ok"] and rep["violations"]
    v = WeightSeq.from_values([2.0] * (H + 1))
    w = WeightSeq.from_values([3.0] * (H + 1))
    inside, rep = verify_ratio_band(v, w, [10, 100], 0.5, H)
    assert len(inside) == 0 and rep["ok"]


def test_thm42_default_config():
    cfg = Thm42Config.default(3)
    assert cfg.n_seq == (4, 256, 262144)
    assert list(zip(cfg.phi1, cfg.phi2)) == [(1, 1), (1, 1), (1, 2)]
    assert cfg.alpha[1] == 1.0
    for J in range(2, 8):
        assert J ** (2 * default_alpha(J)) <= 4 / 3 + 1e-12
    assert all(J <= l for l, (J, _) in enumerate(diagonal_pairs(10), start=1))
    assert z_band_violations(cfg) == [] and block_read_violations(cfg) == []
    back = Thm42Config.from_params(cfg.to_params())
    assert back.to_params() == cfg.to_params()


def test_thm42_predicates_rejected():
    cfg = Thm42Config.default(3)
    with pytest.raises(ValueError, match="predicate failed"):
        Thm42Config((4, 3, 100), cfg.phi1, cfg.phi2, cfg.alpha, cfg.grid)
    with pytest.raises(ValueError, match="phi1"):
        Thm42Config(cfg.n_seq, (2, 1, 1), cfg.phi2, {1: 1.0, 2: 0.2}, default_grid(2, 1))
    with pytest.raises(ValueError, match="4/3"):
        Thm42Config(cfg.n_seq, (1, 2, 1), cfg.phi2, {1: 1.0, 2: 1.0}, default_grid(2, 1))
    with pytest.raises(ValueError):
        gen_thm42(cfg, 2 * cfg.n_seq[-1] - 1)


def test_thm42_structure():
    cfg = Thm42Config.default(3)
    H = 2 * cfg.n_seq[-1]
    v, w = gen_thm42(cfg, H)
    patterns = [cfg.z(l) for l in range(1, 4)]
    assert ratio_identity_error(v, w, cfg.n_seq, patterns)["pass"]
    for l in range(1, 4):
        z = cfg.z(l)
        for i in sorted({1, len(z) // 2, len(z)}):
            assert ratio_value(v, w, cfg.n_seq[l - 1] + i - 1) == pytest.approx(z[i - 1], rel=1e-9)
    _, rep = verify_ratio_band(v, w, cfg.n_seq, 0.5, H, "long")
    assert rep["ok"]
    A, blocks = thm42_hitting_set(cfg, 1, 2, H)
    assert all(b["match"] for b in blocks)
    assert len(A) == sum(b["tiles"] for b in blocks)


def test_block_hitting_set():
    A = block_hitting_set([10, 100], [2, 3], 5, 105)
    assert A.elements == (10, 15, 100, 105)


def test_powers_constants():
    cfg = PowersConfig()
    c = cfg.constants()
    assert cfg.delta == Fraction(1, 2)
    assert c["gamma"] == pytest.approx(math.log(2) / math.log(3))
    assert c["Gamma"] == pytest.approx(math.log(3) / math.log(2))
    assert c["r"] == pytest.approx(min(1 / c["gamma"], 2) * (1 - 1e-6))
    assert c["M"] == math.ceil(max(4, c["Gamma"])) + 1 == 5
    assert 1 < cfg.ratio < cfg.r_sup and cfg.multiplier > cfg.M_inf
    with pytest.raises(ValueError):
        PowersConfig(r=Fraction(1))
    with pytest.raises(ValueError):
        PowersConfig(M=4)
    with pytest.raises(ValueError):
        PowersConfig(lambdas=(3.0, 2.0))


def test_powers_scaffold_intervals():
    cfg = PowersConfig(r=Fraction(3, 2), M=5)
    ivs = scaffold_intervals(cfg, 10 ** 6)
    assert ivs
    for j, (a, b) in enumerate(ivs, start=1):
        start = Fraction(5) ** j * Fraction(3, 2) ** j
        assert a > start and b < start * Fraction(3, 2) - j
        assert a - 1 <= start and b + 1 >= start * Fraction(3, 2) - j
    assert all(b1 < a2 for (_, b1), (a2, _) in zip(ivs, ivs[1:]))
    B, _ = gen_powers_scaffold(cfg, 10 ** 6)
    assert len(B) == sum(b - a + 1 for a, b in ivs)
    with pytest.raises(ValueError):
        gen_powers_scaffold(cfg, 5)


def test_powers_family():
    system, fam, B, consts = gen_powers_ld_set(PowersConfig(), 100_000, 3)
    assert verify_separation(fam).ok
    assert [a.elements[0] for a in fam.sets] == [66, 94, 586]
    assert [len(a) for a in fam.sets] == [1637, 526, 163]
    assert all(a.issubset(B) for a in fam.sets)


def test_generator_configs_round_trip(thm41):
    cfg, v, w = thm41
    back = weights_from_generator("thm41", v.params)
    assert np.array_equal(back.log_table, v.log_table)
    assert WeightSeq.from_config(w.to_config()).log_table.tolist() == w.log_table.tolist()
    with pytest.raises(ValueError):
        weights_from_generator("thm99", {})
