import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import LAMBDA_A2, LAMBDA_A94, MU_A2, MU_A94, REFERENCE_D_FAMILY, random_system
from switchdiag.feasibility import (
    PROP4,
    THEOREM7,
    EnumerationCapError,
    FeasibilityError,
    MatrixSet,
    common_sets,
    coupled_slack,
    coupled_slack_bruteforce,
    feasible_coupled,
    feasible_scaled,
    minimal_coupled_scaling,
    minimal_scaling,
    multi_delay_sets,
    row_selection_report,
    scaled_slack,
    verify_scaling_witness,
)
from switchdiag.linalg import spectral_radius
from switchdiag.system import SwitchedDelaySystem

# exact zeros or moderate magnitudes; entries near 1e-200 push Perron vectors
# out of the double range (see test_linalg)
unit = st.one_of(st.just(0.0), st.floats(1e-6, 1, allow_nan=False))
# entries bounded away from 0 keep every Perron vector inside the LP box
# [1, 1e6]; defective or reducible sets can need a wider dynamic range
positive = st.floats(0.01, 1, allow_nan=False)


@st.composite
def matrix_sets(draw, max_n=3, max_k=3, elements=unit):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, max_k))
    return MatrixSet(draw(arrays(np.float64, (k, n, n), elements=elements)))


# -- MatrixSet ---------------------------------------------------------------


def test_matrix_set_rejects_bad_input():
    with pytest.raises(FeasibilityError):
        MatrixSet(np.zeros((0, 2, 2)))
    with pytest.raises(FeasibilityError):
        MatrixSet(np.zeros((1, 2, 3)))
    with pytest.raises(FeasibilityError):
        MatrixSet([[[-1.0]]])
    with pytest.raises(FeasibilityError):
        MatrixSet([[[np.nan]]])


def test_matrix_set_promotes_single_matrix():
    M = MatrixSet(np.eye(3))
    assert len(M) == 1 and M.n == 3


# -- feasible_scaled ---------------------------------------------------------


def test_zero_set_is_strictly_feasible_with_unit_vector():
    w = feasible_scaled(MatrixSet(np.zeros((1, 2, 2))), 0.5, strict=True)
    assert w is not None
    assert w.slack > 0
    # any v >> 0 works; the normalised one is the lower corner of the box
    assert np.all(w.v >= 1.0)
    assert w.v / w.v.min() == pytest.approx(np.ones(2))


def test_identity_is_not_strictly_feasible_at_one():
    assert feasible_scaled(MatrixSet(np.eye(2)), 1.0, strict=True) is None
    assert feasible_scaled(MatrixSet(np.eye(2)), 1.0, strict=False) is not None


def test_lambda_threshold_at_nine_quarters(sys_a94):
    _, M2 = common_sets(sys_a94)
    assert feasible_scaled(M2, 0.86, strict=True) is None
    assert feasible_scaled(M2, 0.87, strict=True) is not None


def test_nonpositive_scaling_is_an_error():
    with pytest.raises(FeasibilityError):
        feasible_scaled(MatrixSet(np.eye(2)), 0.0)


@given(matrix_sets(), st.floats(0.05, 3.0), st.floats(1.0, 2.0))
def test_feasibility_is_monotone_in_scaling(M, lam, factor):
    if feasible_scaled(M, lam, strict=True) is not None:
        assert feasible_scaled(M, lam * factor, strict=True) is not None


@given(matrix_sets(), st.floats(0.05, 3.0), st.booleans())
def test_witness_reverifies(M, lam, strict):
    w = feasible_scaled(M, lam, strict=strict)
    if w is not None:
        assert np.all(w.v > 0)
        assert verify_scaling_witness(M, w, strict=strict) == pytest.approx(w.slack)
        assert scaled_slack(M, lam, w.v) >= (1e-9 if strict else -1e-9)


def test_tampered_witness_is_rejected():
    M = MatrixSet([[[0.5, 0.1], [0.2, 0.3]]])
    w = feasible_scaled(M, 1.0)
    bad = type(w)(0.1, w.v, w.slack)
    with pytest.raises(FeasibilityError):
        verify_scaling_witness(M, bad)


# -- minimal scaling ---------------------------------------------------------


def test_minimal_scaling_thresholds_at_two(sys_a2):
    M1, M2 = common_sets(sys_a2)
    lam, wl = minimal_scaling(M2)
    mu, wm = minimal_scaling(M1)
    assert lam == pytest.approx(LAMBDA_A2, abs=2e-9)
    assert mu == pytest.approx(MU_A2, abs=2e-9)
    verify_scaling_witness(M2, wl, strict=True)
    verify_scaling_witness(M1, wm, strict=True)


def test_minimal_scaling_of_zero_set():
    lam, w = minimal_scaling(MatrixSet(np.zeros((1, 3, 3))), tol=1e-9)
    assert 0 <= lam < 1e-9
    assert w.slack > 0


def test_minimal_scaling_rejects_bad_tol():
    with pytest.raises(FeasibilityError):
        minimal_scaling(MatrixSet(np.eye(2)), tol=0)


@given(matrix_sets(max_n=2, max_k=2, elements=positive), st.floats(0.1, 10.0))
def test_minimal_scaling_scale_covariance(M, alpha):
    lam, _ = minimal_scaling(M)
    lam_a, _ = minimal_scaling(M.scaled(alpha))
    # bisection error is tol on each side, scaled by alpha on the first
    assert lam_a == pytest.approx(alpha * lam, abs=2e-9 * max(1.0, alpha))


@given(matrix_sets(elements=positive))
def test_minimal_scaling_matches_row_selection_radius(M):
    lam, _ = minimal_scaling(M)
    assert abs(lam - row_selection_report(M).rho_max) <= 2e-9


# -- row selections ------------------------------------------------------------


def test_box_normalisation_offsets_defective_sets():
    # (lam - 1) v2 >= v1 >= 1 with v2 <= 1e6 forces lam >= 1 + 1e-6
    lam, _ = minimal_scaling(MatrixSet([[[1.0, 0.0], [1.0, 1.0]]]))
    assert lam == pytest.approx(1.0 + 1e-6, abs=1e-8)


def test_singleton_row_selection():
    A = np.array([[0.2, 0.7], [0.4, 0.1]])
    rep = row_selection_report(MatrixSet(A))
    assert rep.count == 1
    assert rep.argmax == (0, 0)
    assert rep.rho_max == pytest.approx(spectral_radius(A), abs=1e-12)


def test_row_selection_lambda_at_two(sys_a2):
    _, M2 = common_sets(sys_a2)
    rep = row_selection_report(M2)
    assert rep.rho_max == pytest.approx(LAMBDA_A2, abs=1e-9)
    # row 1 from A2 + B2, row 2 from A1 + B1
    assert rep.argmax == (1, 0)


def test_row_selection_mu_at_nine_quarters(sys_a94):
    # The printed matrices give (17 + sqrt 385)/32, not the quoted closed form;
    # see the ledger entry on a = 9/4.
    M1, _ = common_sets(sys_a94)
    rep = row_selection_report(M1)
    assert rep.rho_max == pytest.approx(MU_A94, abs=1e-9)
    assert spectral_radius(rep.matrix(M1)) == pytest.approx(rep.rho_max, abs=1e-12)


def test_row_selection_brute_force_agrees_with_eigvals(sys_a94):
    M1, _ = common_sets(sys_a94)
    K = len(M1)
    best = max(
        np.abs(np.linalg.eigvals(np.array([M1.members[i, 0], M1.members[j, 1]]))).max()
        for i in range(K)
        for j in range(K)
    )
    assert row_selection_report(M1).rho_max == pytest.approx(best, abs=1e-9)


@given(matrix_sets())
def test_row_selection_count_and_argmax(M):
    rep = row_selection_report(M)
    assert rep.count == len(M) ** M.n
    assert all(0 <= k < len(M) for k in rep.argmax)
    assert spectral_radius(rep.matrix(M)) == pytest.approx(rep.rho_max, abs=1e-9)


def test_row_selection_argmax_is_first_in_lexicographic_order():
    # all selections tie, so the first assignment must be reported
    M = MatrixSet(np.stack([np.eye(2), np.eye(2), np.eye(2)]))
    assert row_selection_report(M).argmax == (0, 0)


def test_row_selection_cap():
    M = MatrixSet(np.zeros((4, 3, 3)))
    with pytest.raises(EnumerationCapError) as info:
        row_selection_report(M, cap=10)
    assert info.value.cap == 10 and info.value.size == 64


@given(matrix_sets())
def test_strict_feasibility_at_one_matches_spectral_oracle(M):
    rho = row_selection_report(M).rho_max
    # v <= 1e6 caps the attainable slack near the boundary
    assume(abs(rho - 1.0) > 1e-4)
    assert (feasible_scaled(M, 1.0, strict=True) is not None) == (rho < 1.0)


# -- system-derived sets ---------------------------------------------------------


def test_common_sets_shapes(sys_a2):
    M1, M2 = common_sets(sys_a2)
    assert len(M1) == 4 and len(M2) == 2
    A, B = sys_a2.A, sys_a2.delay_blocks
    np.testing.assert_array_equal(M1.members[1], (A[0] + B[1]).T)
    np.testing.assert_array_equal(M2.members[1], A[1] + B[1])


def test_multi_delay_sets_reduce_to_common_sets_at_l1(sys_a2):
    M1, M2 = common_sets(sys_a2)
    D1, D2 = multi_delay_sets(sys_a2)
    assert minimal_scaling(D1)[0] == pytest.approx(minimal_scaling(M1)[0], abs=2e-9)
    assert minimal_scaling(D2)[0] == pytest.approx(minimal_scaling(M2)[0], abs=2e-9)


def test_multi_delay_sets_cap():
    sys = SwitchedDelaySystem(np.zeros((3, 1, 1)), np.zeros((4, 3, 1, 1)))
    with pytest.raises(EnumerationCapError):
        multi_delay_sets(sys, cap=100)


# -- coupled systems ---------------------------------------------------------------


def test_reference_family_is_a_prop4_witness(sys_a94):
    slack = coupled_slack(sys_a94, 1.152, REFERENCE_D_FAMILY, PROP4)
    assert slack >= 0
    assert slack == pytest.approx(coupled_slack_bruteforce(sys_a94, 1.152, REFERENCE_D_FAMILY, PROP4))
    assert feasible_coupled(sys_a94, 1.152, PROP4) is not None


def test_prop4_infeasible_at_point_nine(sys_a94):
    assert feasible_coupled(sys_a94, 0.9, PROP4) is None


def test_minimal_prop4_scaling_at_nine_quarters(sys_a94):
    mu, w = minimal_coupled_scaling(sys_a94, PROP4)
    assert mu <= 1.152
    assert w.slack > 0
    assert coupled_slack_bruteforce(sys_a94, w.mu, w.d_family, PROP4) > 0


def test_coupled_variant_and_precondition_errors(sys_a2):
    with pytest.raises(FeasibilityError):
        feasible_coupled(sys_a2, 1.0, "bogus")
    with pytest.raises(FeasibilityError):
        feasible_coupled(sys_a2, 0.0)
    multi = SwitchedDelaySystem(np.zeros((2, 2, 2)), np.ones((2, 2, 2, 2)))
    with pytest.raises(FeasibilityError):
        feasible_coupled(multi, 1.0)
    with pytest.raises(EnumerationCapError):
        feasible_coupled(sys_a2, 1.0, THEOREM7, cap=8)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3), st.floats(0.3, 3.0))
def test_compact_lp_slack_equals_brute_force(seed, n, N, mu):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, n, N, scale=0.5)
    d = rng.uniform(1, 5, (N, n))
    for variant in (THEOREM7, PROP4):
        assert coupled_slack(sys, mu, d, variant) == pytest.approx(
            coupled_slack_bruteforce(sys, mu, d, variant), abs=1e-12
        )


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3), st.floats(0.3, 3.0))
def test_coupled_witness_reverifies_by_enumeration(seed, n, N, mu):
    sys = random_system(np.random.default_rng(seed), n, N, scale=0.5)
    for variant in (THEOREM7, PROP4):
        w = feasible_coupled(sys, mu, variant)
        if w is not None:
            assert np.all(w.d_family > 0)
            assert coupled_slack_bruteforce(sys, mu, w.d_family, variant) >= -1e-9


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_single_mode_coupled_collapses_to_common(seed, n):
    sys = random_system(np.random.default_rng(seed), n, 1)
    M1, _ = common_sets(sys)
    mu_c, _ = minimal_coupled_scaling(sys, THEOREM7)
    mu_p, _ = minimal_coupled_scaling(sys, PROP4)
    mu, _ = minimal_scaling(M1)
    rho = spectral_radius(M1.members[0])
    assert mu_c == pytest.approx(mu, abs=2e-9)
    assert mu_p == pytest.approx(mu, abs=2e-9)
    assert mu == pytest.approx(rho, abs=2e-9)


@pytest.mark.parametrize("seed, n, N, scale", [(4380, 1, 3, 0.6), (1, 1, 3, 1.0), (1097476, 2, 2, 1.0)])
def test_coupled_bisection_regressions(seed, n, N, scale):
    # near-boundary LPs that once drove the tableau to a singular basis
    sys = random_system(np.random.default_rng(seed), n, N, scale=scale)
    mu, _ = minimal_scaling(common_sets(sys)[0])
    mu7, w7 = minimal_coupled_scaling(sys, THEOREM7)
    mu4, w4 = minimal_coupled_scaling(sys, PROP4)
    assert mu4 <= mu7 + 2e-9 and mu7 <= mu + 2e-9
    assert coupled_slack_bruteforce(sys, w7.mu, w7.d_family, THEOREM7) > 0
    assert coupled_slack_bruteforce(sys, w4.mu, w4.d_family, PROP4) > 0


# thresholds from scipy's HiGHS under a 1e-12 bisection, frozen
BADLY_SCALED = [
    # eta six decades below the d columns; phase 1 used to stop on noise
    (
        [[[0.3399753285216553]], [[0.02014272140521045]]],
        [[[0.1719615322236494]], [[0.2973536460813006]]],
        THEOREM7,
        0.6373289746036335,
    ),
    # an OK simplex point that broke an eta row and overstated mu by 4e-4
    (
        [
            [[1.383381786231973, 1.4113560207375646], [2.338372674042767, 2.2374553202721725]],
            [[2.044225704766042, 2.562123458995432], [2.4302076548092866, 1.8587035874211733]],
        ],
        [
            [[2.741178132647837, 0.1629439582807778], [2.722108090911245, 1.7588579084881248]],
            [[0.5388394662739542, 0.4984109696986645], [1.012888534072489, 1.221468975361613]],
        ],
        THEOREM7,
        7.994289542247008,
    ),
]


@pytest.mark.parametrize("A, B, variant, expected", BADLY_SCALED)
def test_badly_scaled_coupled_lps(A, B, variant, expected):
    sys = SwitchedDelaySystem.single_delay(np.array(A), np.array(B))
    mu, w = minimal_coupled_scaling(sys, variant)
    assert mu == pytest.approx(expected, abs=2e-9)
    assert coupled_slack_bruteforce(sys, w.mu, w.d_family, variant) > 0


def test_single_mode_zero_coupled_scaling():
    sys = SwitchedDelaySystem(np.zeros((1, 2, 2)), np.zeros((1, 1, 2, 2)))
    mu, _ = minimal_coupled_scaling(sys, THEOREM7)
    assert 0 <= mu < 1e-9


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_prop4_never_needs_more_than_theorem7(seed, n, N):
    sys = random_system(np.random.default_rng(seed), n, N)
    mu7, _ = minimal_coupled_scaling(sys, THEOREM7)
    mu4, _ = minimal_coupled_scaling(sys, PROP4)
    M1, _ = common_sets(sys)
    mu, _ = minimal_scaling(M1)
    assert mu4 <= mu7 + 2e-9
    assert mu7 <= mu + 2e-9
