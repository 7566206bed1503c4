import math

import numpy as np
import pytest

from medianshape.coreset1d import (build_chunks, build_coreset,
                                   eval_weighted_l1, eval_weighted_l1_many,
                                   eval_weighted_l2, eval_weighted_l2_many,
                                   eval_weighted_monotone, perturb)
from medianshape.testkit import gen_1d, oracle_1d


def test_build_chunks_recurrence_small():
    # n=20 with a 5-singleton prefix: alpha grows from 5 by ceil(1.2 * a),
    # capped at n/2 = 10, so the alpha sequence is 5, 6, 8, 10
    eps = 1.0 - 1e-12   # growth factor (1 + eps/10) ~= 1.2 with m overridden
    part = build_chunks(20, eps, m_override=5)
    a, expect = 5, [5]
    while a < 10:
        a = min(math.ceil((1 + eps / 10) * a), 10)
        expect.append(a)
    assert list(part.alphas) == expect


def test_build_chunks_all_singletons_small_n():
    part = build_chunks(8, 0.5)   # m = 20 > n/2 -> all singletons
    assert part.m == 20
    assert part.num_pairs == 4
    assert all(s == 1 for s in part.pair_sizes())


def test_build_chunks_direct_recurrence_oracle():
    n, eps = 100, 1.0 - 1e-12
    part = build_chunks(n, eps)
    m, half = math.ceil(10 / eps), 50
    a, expect = m, list(range(m + 1))
    while a < half:
        a = min(math.ceil((1 + eps / 10) * a), half)
        expect.append(a)
    assert part.m == m
    assert list(part.bounds) == expect


def test_chunks_partition_indices():
    for n in (17, 100, 9999, 10000):
        part = build_chunks(n, 0.2)
        covered = []
        for i in range(part.num_pairs):
            covered.extend(range(*part.left_range(i)))
            lo, hi = part.right_range(i)
            covered.extend(range(lo, hi))
            assert part.left_range(i)[1] - part.left_range(i)[0] == hi - lo
        if part.has_middle:
            covered.append(part.half)
        assert sorted(covered) == list(range(n))


def test_build_chunks_input_errors():
    with pytest.raises(ValueError):
        build_chunks(0, 0.2)
    with pytest.raises(ValueError):
        build_chunks(10, 0.0)
    with pytest.raises(ValueError):
        build_chunks(10, 1.0)


def test_build_coreset_small_all_singletons():
    cs = build_coreset([1.0, 2.0, 3.0], 0.2)
    v, w = cs.as_weighted()
    assert list(v) == [1.0, 2.0, 3.0]
    assert list(w) == [1, 1, 1]


def test_build_coreset_weight_conservation():
    z = np.arange(1, 10001, dtype=float)
    cs = build_coreset(z, 0.2)
    assert cs.total_weight == 10000
    assert cs.size < 1000


def test_build_coreset_constant_values():
    cs = build_coreset(np.full(500, 7.0), 0.3)
    v, w = cs.as_weighted()
    assert np.all(v == 7.0)
    q = 3.0
    assert eval_weighted_l1(v, w, q) == 500 * 4.0


def test_build_coreset_rejects_unsorted():
    with pytest.raises(ValueError):
        build_coreset([3.0, 1.0, 2.0], 0.2)


def test_rep_rules_draw_from_inside_chunks():
    z = np.sort(np.random.default_rng(0).uniform(0, 100, 2000))
    for rule in ("first", "median-of-chunk"):
        cs = build_coreset(z, 0.3, rep_rule=rule)
        assert cs.total_weight == 2000
        assert set(cs.left).issubset(set(z))
        assert set(cs.right).issubset(set(z))
    with pytest.raises(ValueError):
        build_coreset(z, 0.3, rep_rule="last")


def test_eval_weighted_l1_trivial():
    assert eval_weighted_l1([0.0, 10.0], [1, 1], 5.0) == 10.0
    assert eval_weighted_l1([0.0], [3], 4.0) == 12.0


def test_eval_weighted_l2_trivial():
    assert eval_weighted_l2([0.0, 2.0], [1, 1], 1.0) == 2.0
    assert eval_weighted_l2([3.0], [2], 0.0) == 18.0


def test_eval_weighted_monotone_reduces_to_l1_l2():
    assert eval_weighted_monotone([0.0, 10.0], [1, 1], 5.0, lambda x: x) == 10.0
    assert eval_weighted_monotone([0.0, 2.0], [1, 1], 1.0, lambda x: x ** 2) == 2.0


def test_eval_matches_direct_summation():
    rng = np.random.default_rng(1)
    v = rng.uniform(-50, 50, 100)
    w = rng.integers(1, 10, 100)
    for q in rng.uniform(-60, 60, 50):
        assert eval_weighted_l1(v, w, q) == pytest.approx(
            oracle_1d(v, w, q, "l1"), rel=1e-12)
        assert eval_weighted_l2(v, w, q) == pytest.approx(
            oracle_1d(v, w, q, "l2"), rel=1e-12)
        direct3 = math.fsum(w * np.abs(v - q) ** 3)
        assert eval_weighted_monotone(v, w, q, lambda x: x ** 3) == pytest.approx(
            direct3, rel=1e-12)


def test_eval_many_matches_scalar_eval():
    rng = np.random.default_rng(2)
    v = rng.uniform(0, 100, 500)
    w = rng.integers(1, 5, 500)
    qs = rng.uniform(-10, 110, 200)
    l1 = eval_weighted_l1_many(v, w, qs)
    l2 = eval_weighted_l2_many(v, w, qs)
    for i in (0, 17, 99, 199):
        assert l1[i] == pytest.approx(eval_weighted_l1(v, w, qs[i]), rel=1e-12)
        assert l2[i] == pytest.approx(eval_weighted_l2(v, w, qs[i]), rel=1e-12)


def test_eval_rejects_bad_weights():
    with pytest.raises(ValueError):
        eval_weighted_l1([1.0], [0], 0.0)
    with pytest.raises(ValueError):
        eval_weighted_l1([1.0], [1], float("nan"))


def test_perturb_zero_offsets_identity():
    z = np.sort(np.random.default_rng(3).uniform(0, 100, 1000))
    cs = build_coreset(z, 0.2)
    cr = perturb(cs, np.zeros((len(cs.left), 2)))
    assert np.array_equal(cr.left, cs.left)
    assert np.array_equal(cr.right, cs.right)
    assert cr.total_weight == cs.total_weight


def test_perturb_max_legal_offset_value():
    # l=0, r=20, eps=0.2: the bound is (0.2/20)*20 = 0.2
    z = np.array([0.0, 20.0])
    cs = build_coreset(z, 0.2)
    off = np.array([[0.2, -0.2]])
    cr = perturb(cs, off)
    assert cr.left[0] == 0.2
    with pytest.raises(ValueError, match="pair 0"):
        perturb(cs, np.array([[0.21, 0.0]]))


def test_perturb_keeps_middle_and_weights():
    z = np.sort(np.random.default_rng(4).uniform(0, 10, 1001))
    cs = build_coreset(z, 0.25)
    b = (cs.eps / 20) * np.abs(cs.left - cs.right)
    cr = perturb(cs, np.stack([b, -b], axis=1))
    assert cr.middle == cs.middle
    assert cr.total_weight == 1001


def test_lemma_style_recentering_bound():
    # |nu_A(q) - |A| * |psi - q|| <= nu_A(psi) for any psi, q
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.uniform(-10, 10, 200)
        psi, q = rng.uniform(-12, 12, 2)
        nu_q = float(np.sum(np.abs(a - q)))
        nu_psi = float(np.sum(np.abs(a - psi)))
        assert abs(nu_q - len(a) * abs(psi - q)) <= nu_psi + 1e-9


def test_coreset_sweep_error_within_eps_fifth():
    # unperturbed coreset stays within eps/5 everywhere on a dense sweep
    for kind in ("uniform", "clustered", "heavy-tailed"):
        z = gen_1d(kind, 5000, 7)
        wz = np.ones(len(z))
        qs = np.linspace(z[0], z[-1], 400)
        nu_z = eval_weighted_l1_many(z, wz, qs)
        for eps in (0.5, 0.1):
            v, w = build_coreset(z, eps).as_weighted()
            nu_s = eval_weighted_l1_many(v, w, qs)
            assert (np.abs(nu_s - nu_z) / nu_z).max() <= eps / 5 + 1e-9
