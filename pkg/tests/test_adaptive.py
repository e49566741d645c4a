import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mclsquad.adaptive import (
    BudgetSplit,
    DegreeSchedule,
    antithetic_mcls,
    degree_for_budget,
    even_index_subset,
    level_for_budget,
    mclsa_run,
    sg_mclsa_run,
    split_for_level,
    stratified_mcls,
)
from mclsquad.basis import eval_basis_matrix, multi_index_set
from mclsquad.core import HyperRect, Integrand, RngSpec
from mclsquad.estimators import mc_estimate, mcls_estimate
from mclsquad.sampling import (
    StratumPartition,
    antithetic_batch,
    stratified_batch,
    uniform_batch,
)
from mclsquad.sparsegrid import sg_build

UNIT1 = HyperRect.unit(1)
UNIT2 = HyperRect.unit(2)


# ------------------------------------------------------------ degree rules


@pytest.mark.parametrize(
    "dim,n,expected",
    [(6, 1000, 3), (1, 100, 9), (6, 50, 0), (2, 1000, 12), (1, 10, 0)],
)
def test_degree_for_budget_examples(dim, n, expected):
    assert degree_for_budget(DegreeSchedule(dim=dim), n) == expected


def test_degree_for_budget_respects_ratio():
    assert degree_for_budget(DegreeSchedule(dim=1, ratio=5.0), 100) == 19


def test_degree_for_budget_rejects_empty_budget():
    with pytest.raises(ValueError):
        degree_for_budget(DegreeSchedule(dim=2), 0)


@given(st.integers(1, 20000), st.integers(1, 20000))
@settings(max_examples=60, deadline=None)
def test_degree_for_budget_monotone(n1, n2):
    sched = DegreeSchedule(dim=3)
    lo, hi = sorted((n1, n2))
    assert degree_for_budget(sched, lo) <= degree_for_budget(sched, hi)


# ------------------------------------------------------------ budget splits


def test_split_for_level_spends_exact_node_count():
    split = split_for_level(2, 3, 100)
    assert (split.n_total, split.n_build, split.n_regression) == (100, 17, 83)


def test_budget_split_validation():
    with pytest.raises(ValueError, match="sum"):
        BudgetSplit(n_total=10, n_build=3, n_regression=6)
    with pytest.raises(ValueError, match="negative"):
        BudgetSplit(n_total=10, n_build=-2, n_regression=12)
    with pytest.raises(ValueError, match="at least 4"):
        BudgetSplit(n_total=5, n_build=2, n_regression=3)


def test_level_for_budget():
    assert level_for_budget(2, 100) == 4  # counts 1,5,17,49 fit half of 100; 129 doesn't
    assert level_for_budget(2, 2) == 1
    assert level_for_budget(1, 1000, build_share=0.2) == 7
    with pytest.raises(ValueError, match="build_share"):
        level_for_budget(2, 100, build_share=1.5)


# ------------------------------------------------------------- MCLSA runs


def test_mclsa_constant_function():
    f = Integrand("c", 2, UNIT2, lambda x: np.full(len(x), 3.25))
    rep = mclsa_run(f, 400, RngSpec(seed=1))
    assert rep.method == "mclsa"
    assert rep.degree == degree_for_budget(DegreeSchedule(dim=2), 400)
    assert abs(rep.estimate - 3.25) < 1e-12


def test_mclsa_exact_when_degree_reaches_the_function():
    iset = multi_index_set(4, 2)
    coef = np.zeros(iset.size)
    coef[0], coef[2], coef[7] = 1.2, 0.5, -0.3

    def fn(pts):
        return eval_basis_matrix(pts, iset) @ coef

    f = Integrand("span", 4, HyperRect.unit(4), fn)
    # budget 150 schedules degree 2 in d=4 (C(6,4)=15 <= 15 < C(7,4)=35)
    rep = mclsa_run(f, 150, RngSpec(seed=2))
    assert rep.degree == 2
    assert abs(rep.estimate - 1.2) < 1e-9


def test_mclsa_degree_zero_fallback_is_plain_mc():
    f = Integrand("g", 6, HyperRect.unit(6), lambda x: np.sin(x.sum(axis=1)))
    rng = RngSpec(seed=33)
    rep = mclsa_run(f, 50, rng)
    mc = mc_estimate(uniform_batch(f, 50, rng))
    assert rep.estimate == mc.estimate
    assert rep.sigma2 == mc.sigma2
    assert rep.ci_half_width == mc.ci_half_width
    assert rep.method == "mclsa"
    assert rep.degree == 0


def test_mclsa_max_basis_lowers_the_degree():
    f = Integrand("g", 2, UNIT2, lambda x: np.exp(x[:, 0] - x[:, 1]))
    rep = mclsa_run(f, 1000, RngSpec(seed=3), max_basis=20)
    assert rep.degree == 4  # C(6,2)=15 fits under 20, C(7,2)=21 does not
    assert rep.n_basis == 15


def test_mclsa_sampler_cache_round_trip():
    f = Integrand("g", 2, UNIT2, lambda x: np.cos(x[:, 0] * x[:, 1]))
    cache = {}
    rep1 = mclsa_run(f, 300, RngSpec(seed=4), sampler_cache=cache)
    assert (rep1.degree, "total") in cache
    rep2 = mclsa_run(f, 300, RngSpec(seed=4), sampler_cache=cache)
    assert rep1.estimate == rep2.estimate
    assert rep1.sigma2 == rep2.sigma2


def test_mclsa_kind_changes_the_basis_not_the_schedule():
    f = Integrand("g", 3, HyperRect.unit(3), lambda x: x.sum(axis=1))
    rep_t = mclsa_run(f, 500, RngSpec(seed=5), kind="total")
    rep_e = mclsa_run(f, 500, RngSpec(seed=5), kind="euclidean")
    # the budget rule picks the same k either way; the euclidean ball then
    # holds more indices than the simplex at that k
    assert rep_e.degree == rep_t.degree
    assert rep_e.n_basis == multi_index_set(3, rep_e.degree, "euclidean").size
    assert rep_e.n_basis > rep_t.n_basis


# --------------------------------------------------- sparse-grid regression


def test_sg_mclsa_exact_for_grid_aligned_function():
    f = Integrand("tent", 1, UNIT1, lambda x: np.minimum(x[:, 0], 1 - x[:, 0]))
    rep = sg_mclsa_run(f, 3, 50, RngSpec(seed=6))
    assert abs(rep.estimate - 0.25) < 1e-12
    assert rep.sigma2 < 1e-24
    assert rep.n_samples == 7 + 50
    assert rep.method == "sgmcls"
    assert rep.level == 3


def test_sg_mclsa_prebuilt_interpolant_matches():
    f = Integrand("sm", 2, UNIT2, lambda x: np.exp(-x.sum(axis=1)))
    p = sg_build(f, 3)
    rep_a = sg_mclsa_run(f, 3, 100, RngSpec(seed=7))
    rep_b = sg_mclsa_run(f, 3, 100, RngSpec(seed=7), interpolant=p)
    assert rep_a.estimate == rep_b.estimate
    assert rep_a.n_samples == rep_b.n_samples == p.node_count + 100


def test_sg_mclsa_rejects_mismatched_interpolant():
    f = Integrand("sm", 2, UNIT2, lambda x: x.sum(axis=1))
    p = sg_build(f, 2)
    with pytest.raises(ValueError, match="interpolant"):
        sg_mclsa_run(f, 3, 100, RngSpec(seed=8), interpolant=p)


def test_sg_mclsa_ci_uses_combined_sample_count():
    f = Integrand("sm", 2, UNIT2, lambda x: np.sin(x[:, 0] + x[:, 1]))
    rep = sg_mclsa_run(f, 2, 64, RngSpec(seed=9))
    expect = 2.0 * rep.kappa * np.sqrt(rep.sigma2 / rep.n_samples)
    assert rep.ci_half_width == pytest.approx(expect, rel=1e-12)


# ----------------------------------------------------------- stratified LS


def test_stratified_single_stratum_is_plain_fit():
    f = Integrand("e", 1, UNIT1, lambda x: np.exp(x[:, 0]))
    part = StratumPartition.regular(UNIT1, 1, 300)
    iset = multi_index_set(1, 2)
    rep = stratified_mcls(f, part, iset, RngSpec(seed=42))
    plain, _ = mcls_estimate(uniform_batch(f, 300, RngSpec(seed=42)), iset)
    assert rep.estimate == plain.estimate
    assert rep.sigma2 == pytest.approx(plain.sigma2, rel=1e-14)
    assert rep.kappa == plain.kappa
    assert rep.method == "strat"


def test_stratified_degree_zero_is_classical_stratified_mc():
    """Constant fits per stratum reduce to volume-weighted stratum means."""
    f = Integrand("e", 1, UNIT1, lambda x: np.exp(x[:, 0]))
    part = StratumPartition.regular(UNIT1, 3, 60)
    rng = RngSpec(seed=10)
    rep = stratified_mcls(f, part, multi_index_set(1, 0), rng)
    classical = sum(
        b.domain.volume() * float(np.mean(b.fvals))
        for b in stratified_batch(f, part, rng)
    )
    assert rep.estimate == classical
    assert rep.degree == 0


def test_stratified_degree_zero_beats_plain_mc_variance():
    f = Integrand("ramp", 1, UNIT1, lambda x: x[:, 0])
    part = StratumPartition.regular(UNIT1, 2, 20)
    iset = multi_index_set(1, 0)
    strat = [
        stratified_mcls(f, part, iset, RngSpec(seed=5000 + i)).estimate
        for i in range(200)
    ]
    plain = [
        mc_estimate(uniform_batch(f, 20, RngSpec(seed=5000 + i))).estimate
        for i in range(200)
    ]
    assert np.var(strat) < np.var(plain)


def test_stratified_quadratic_pieces_beat_single_domain_fit():
    box = HyperRect(lo=(-1.0,), hi=(1.0,))
    f = Integrand("runge", 1, box, lambda x: 1.0 / (1.0 + 25.0 * x[:, 0] ** 2))
    iset = multi_index_set(1, 2)
    part = StratumPartition.regular(box, 4, 4000)
    ratios = []
    for s in range(20):
        rep_s = stratified_mcls(f, part, iset, RngSpec(seed=600 + s))
        rep_p, _ = mcls_estimate(uniform_batch(f, 4000, RngSpec(seed=600 + s)), iset)
        ratios.append(rep_s.ci_half_width / rep_p.ci_half_width)
    assert np.median(ratios) < 1.0


def test_stratified_global_coefficients_mode():
    f = Integrand("sm", 1, UNIT1, lambda x: np.sin(3 * x[:, 0]))
    part = StratumPartition.regular(UNIT1, 2, 100)
    iset = multi_index_set(1, 3)
    rep = stratified_mcls(f, part, iset, RngSpec(seed=11), global_coeffs=True)
    assert rep.method == "strat_global"
    assert rep.n_samples == 100
    assert rep.n_basis == iset.size
    # one shared fit: the estimate differs from per-stratum fitting
    per = stratified_mcls(f, part, iset, RngSpec(seed=11))
    assert rep.estimate != per.estimate


def test_stratified_global_mode_needs_one_index_set():
    f = Integrand("sm", 1, UNIT1, lambda x: x[:, 0])
    part = StratumPartition.regular(UNIT1, 2, 100)
    isets = [multi_index_set(1, 1), multi_index_set(1, 2)]
    with pytest.raises(ValueError, match="single index set"):
        stratified_mcls(f, part, isets, RngSpec(seed=1), global_coeffs=True)


def test_stratified_budget_violation():
    f = Integrand("sm", 1, UNIT1, lambda x: x[:, 0])
    part = StratumPartition.regular(UNIT1, 2, 8)  # 4 points per stratum
    with pytest.raises(ValueError, match="too small"):
        stratified_mcls(f, part, multi_index_set(1, 4), RngSpec(seed=1))


def test_stratified_per_stratum_index_sets():
    f = Integrand("sm", 1, UNIT1, lambda x: np.cos(x[:, 0]))
    part = StratumPartition.regular(UNIT1, 2, 80)
    rep = stratified_mcls(f, part, [multi_index_set(1, 1), multi_index_set(1, 3)], RngSpec(seed=2))
    assert rep.n_basis == 2 + 4
    assert rep.degree is None  # mixed degrees have no single label
    with pytest.raises(ValueError, match="one index set per stratum"):
        stratified_mcls(f, part, [multi_index_set(1, 1)], RngSpec(seed=2))


# ------------------------------------------------------ antithetic fitting


def test_even_index_subset_d2k2():
    iset = multi_index_set(2, 2)
    even = even_index_subset(iset)
    assert iset.size == 6 and even.size == 4
    assert even.indices == ((0, 0), (2, 0), (1, 1), (0, 2))


def test_even_index_subset_keeps_metadata():
    iset = multi_index_set(3, 4, "euclidean")
    even = even_index_subset(iset)
    assert even.kind == "euclidean"
    assert even.degree_cap == 4
    assert all(sum(ix) % 2 == 0 for ix in even.indices)


def _cube(t):
    # product form: (-t)*(-t)*(-t) == -(t*t*t) in floating point, unlike
    # the pow route, whose negative-base fallback rounds differently
    return t * t * t


def test_antithetic_center_odd_integrand_is_exactly_zero():
    f = Integrand("odd", 1, UNIT1, lambda x: _cube(x[:, 0] - 0.5))
    rep = antithetic_mcls(f, multi_index_set(1, 4), 64, RngSpec(seed=3))
    assert rep.estimate == 0.0
    assert rep.method == "anti"


def test_antithetic_zero_for_odd_tensor_in_two_dims():
    # odd factor in x (2x-1 negates exactly under x -> 1-x) times an even
    # factor in y keeps the tensor float-odd about the center
    def fn(x):
        a = 2.0 * x[:, 0] - 1.0
        b = 2.0 * x[:, 1] - 1.0
        return np.sqrt(3.0) * a * (b * b)

    f = Integrand("odd2", 2, UNIT2, fn)
    rep = antithetic_mcls(f, multi_index_set(2, 3), 100, RngSpec(seed=21))
    assert rep.estimate == 0.0


def test_antithetic_matches_full_basis_fit_on_same_batch():
    f = Integrand("mix", 2, UNIT2, lambda x: np.exp(x[:, 0]) * (1 + 0.5 * x[:, 1]))
    iset = multi_index_set(2, 3)
    n_pairs = 200
    rng = RngSpec(seed=13)
    rep = antithetic_mcls(f, iset, n_pairs, rng)
    full, _ = mcls_estimate(antithetic_batch(f, n_pairs, rng), iset)
    assert abs(rep.estimate - full.estimate) < 1e-10
    assert rep.n_samples == 2 * n_pairs


def test_antithetic_underdetermined():
    f = Integrand("sm", 1, UNIT1, lambda x: x[:, 0])
    with pytest.raises(ValueError, match="underdetermined"):
        antithetic_mcls(f, multi_index_set(1, 8), 5, RngSpec(seed=1))
