import numpy as np
import pytest

from locc_forge import majorize
from locc_forge.bipartite import (
    BipartiteState,
    from_schmidt,
    schmidt,
    schmidt_rank,
    squared_spectrum,
)
from locc_forge.errors import InfeasibleError, InvalidInputError, UnsupportedShapeError
from locc_forge.numkit import opnorm, unitarity_defect
from locc_forge.synth import (
    deterministic_stage,
    feasibility,
    final_contraction,
    intermediate_vector,
    max_probability,
    reduce_bob,
    substochastic_matrix,
    synthesize,
    uhlmann_decompose,
)

from helpers import (
    comparable_spectra,
    random_contraction,
    random_spectrum,
    random_state,
    random_unitary,
    state_with_spectrum,
)

BELL = from_schmidt([0.5, 0.5], 2, 2)
SKEW = from_schmidt([0.8, 0.2], 2, 2)


def pmax_bisection_oracle(a_spec, b_spec, iters=80):
    """Independent oracle: bisect the weak-supermajorization predicate.

    Spectral crumbs below 1e-12 are zeroed on both sides (the same input
    conditioning the closed form applies); the predicate itself is evaluated
    strictly, so the bisection brackets the exact flip point.
    """
    a = np.where(np.asarray(a_spec) > 1e-12, a_spec, 0.0)
    b = np.where(np.asarray(b_spec) > 1e-12, b_spec, 0.0)

    def holds(p):
        return majorize.compare(a, p * b, "super", tol=0.0)

    if holds(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def end_to_end_residual(protocol, a_state, b_state):
    """Worst branch distance from sqrt(q * p) times the target amplitude."""
    p = protocol.stage2.p if protocol.stage2 is not None else 1.0
    worst = 0.0
    for out in protocol.outcomes:
        branch = out.M @ a_state.amp @ out.U.T
        if protocol.stage2 is not None:
            branch = protocol.stage2.N @ branch @ protocol.stage2.V.T
        worst = max(worst, opnorm(branch - np.sqrt(out.q * p) * b_state.amp))
    return worst


# ---------------------------------------------------------------------------
# max_probability / feasibility
# ---------------------------------------------------------------------------

def test_pmax_canonical():
    assert abs(max_probability(SKEW, BELL) - 0.4) <= 1e-12


def test_pmax_equal_states():
    assert max_probability(BELL, BELL) == 1.0


def test_pmax_rank_gap_is_zero():
    assert max_probability(from_schmidt([1.0], 2, 2), BELL) == 0.0


def test_pmax_matches_bisection_oracle():
    rng = np.random.default_rng(41)
    for _ in range(60):
        da, db = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        ra = rng.integers(1, min(da, db) + 1) if rng.random() < 0.4 else None
        rb = rng.integers(1, min(da, db) + 1) if rng.random() < 0.4 else None
        a = random_state(da, db, rng, rank=ra)
        b = random_state(da, db, rng, rank=rb)
        closed = max_probability(a, b)
        oracle = pmax_bisection_oracle(squared_spectrum(a), squared_spectrum(b))
        assert abs(closed - oracle) <= 1e-9


def test_pmax_is_sharp():
    # supermajorization holds at the returned p and fails just above it
    rng = np.random.default_rng(40)
    for _ in range(40):
        d = int(rng.integers(2, 6))
        a = random_state(d, d, rng)
        b = random_state(d, d, rng)
        p = max_probability(a, b)
        sa, sb = squared_spectrum(a), squared_spectrum(b)
        assert majorize.compare(sa, p * sb, "super")
        if p < 1.0:
            assert not majorize.compare(sa, (p + 1e-6) * sb, "super")


def test_feasibility_deterministic_pair():
    rep = feasibility(BELL, SKEW)
    assert rep.deterministic_ok
    assert abs(rep.p_max - 1.0) <= 1e-10
    assert rep.rank_ok
    assert rep.super_maj_ok_at_p


def test_feasibility_probabilistic_pair():
    rep = feasibility(SKEW, BELL, p=0.4)
    assert not rep.deterministic_ok
    assert rep.super_maj_ok_at_p
    assert rep.pure_necessary_ok_at_p
    assert abs(rep.p_max - 0.4) <= 1e-12


def test_feasibility_rank_gap():
    rep = feasibility(from_schmidt([1.0], 2, 2), BELL)
    assert not rep.rank_ok
    assert rep.p_max == 0.0


def test_feasibility_super_monotone_in_p():
    rng = np.random.default_rng(42)
    for _ in range(20):
        a = random_state(4, 4, rng)
        b = random_state(4, 4, rng)
        flags = [feasibility(a, b, p).super_maj_ok_at_p for p in np.linspace(0.0, 1.0, 21)]
        # once infeasible, stays infeasible
        assert all(x or not y for x, y in zip(flags, flags[1:]))


def test_feasibility_invariants():
    rng = np.random.default_rng(43)
    for _ in range(60):
        da, db = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        ra = rng.integers(1, min(da, db) + 1) if rng.random() < 0.3 else None
        a = random_state(da, db, rng, rank=ra)
        b = random_state(da, db, rng)
        rep = feasibility(a, b)
        if rep.deterministic_ok:
            assert abs(rep.p_max - 1.0) <= 1e-10
        if rep.p_max > 0.0:
            assert rep.rank_ok


def test_feasibility_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        feasibility(BELL, from_schmidt([1.0], 3, 3))


def test_feasibility_bad_p():
    with pytest.raises(InvalidInputError):
        feasibility(BELL, SKEW, p=1.5)
    with pytest.raises(InvalidInputError):
        feasibility(BELL, SKEW, p="half")


# ---------------------------------------------------------------------------
# intermediate_vector
# ---------------------------------------------------------------------------

def test_intermediate_vector_canonical():
    v = intermediate_vector([0.8, 0.2], [0.5, 0.5], 0.4)
    assert np.allclose(v, [0.8, 0.2], atol=1e-12)


def test_intermediate_vector_deterministic_degenerates():
    b = np.array([0.6, 0.3, 0.1])
    v = intermediate_vector([0.4, 0.35, 0.25], b, 1.0)
    assert np.allclose(v, b, atol=1e-12)


def test_intermediate_vector_three_level():
    v = intermediate_vector([0.55, 0.25, 0.2], [0.5, 0.3, 0.2], 0.9)
    assert np.allclose(v, [0.55, 0.27, 0.18], atol=1e-12)


def test_intermediate_vector_postconditions():
    rng = np.random.default_rng(44)
    for _ in range(60):
        d = int(rng.integers(2, 8))
        a = random_spectrum(d, rng)
        b = random_spectrum(d, rng)
        p_max = max(
            0.0,
            min(
                (np.cumsum(a[::-1])[::-1][k] / np.cumsum(b[::-1])[::-1][k])
                for k in range(d)
            ),
        )
        p = rng.uniform(0.0, min(p_max, 1.0))
        v = intermediate_vector(a, b, p)
        assert abs(v.sum() - 1.0) <= 1e-12
        assert np.all(np.diff(v) <= 1e-14)
        assert np.all(v - p * b >= -1e-14)
        assert majorize.compare(a, v, "maj")


def test_intermediate_vector_rejects_excess_p():
    with pytest.raises(InfeasibleError):
        intermediate_vector([0.8, 0.2], [0.5, 0.5], 0.5)


# ---------------------------------------------------------------------------
# uhlmann_decompose
# ---------------------------------------------------------------------------

def test_uhlmann_equal_operators():
    c = np.diag([0.7, 0.3])
    terms = uhlmann_decompose(c, c)
    assert len(terms) == 1
    w, u = terms[0]
    assert abs(w - 1.0) <= 1e-12
    assert np.linalg.norm(u @ c @ u.conj().T - c) <= 1e-12


def test_uhlmann_two_level_frozen():
    c = np.diag([0.5, 0.5])
    d = np.diag([0.8, 0.2])
    terms = uhlmann_decompose(c, d)
    assert len(terms) == 2
    assert np.allclose(sorted(w for w, _ in terms), [0.5, 0.5], atol=1e-12)
    rec = sum(w * u @ d @ u.conj().T for w, u in terms)
    assert opnorm(rec - c) <= 1e-12


def test_uhlmann_random_reconstruction():
    rng = np.random.default_rng(45)
    for _ in range(20):
        d = 5
        a, b = comparable_spectra(d, rng)
        uc, ud = random_unitary(d, rng), random_unitary(d, rng)
        cm = uc @ np.diag(a) @ uc.conj().T
        dm = ud @ np.diag(b) @ ud.conj().T
        terms = uhlmann_decompose(cm, dm)
        assert len(terms) <= (d - 1) ** 2 + 1
        rec = sum(w * u @ dm @ u.conj().T for w, u in terms)
        assert opnorm(rec - cm) <= 1e-9
        for _, u in terms:
            assert unitarity_defect(u) <= 1e-10


def test_uhlmann_rejects_incomparable():
    with pytest.raises(InfeasibleError):
        uhlmann_decompose(np.diag([0.9, 0.1]), np.diag([0.6, 0.4]))


# ---------------------------------------------------------------------------
# deterministic_stage
# ---------------------------------------------------------------------------

def test_deterministic_stage_self_is_trivial():
    rng = np.random.default_rng(46)
    a = random_state(3, 3, rng)
    outcomes, m0 = deterministic_stage(a, a)
    assert len(outcomes) == 1
    out = outcomes[0]
    assert abs(out.q - 1.0) <= 1e-12
    branch = out.M @ a.amp @ out.U.T
    assert opnorm(branch - a.amp) <= 1e-12
    assert opnorm(m0 @ a.amp) <= 1e-12


def test_deterministic_stage_bell_to_skew():
    outcomes, m0 = deterministic_stage(BELL, SKEW)
    assert len(outcomes) == 2
    assert np.allclose(sorted(o.q for o in outcomes), [0.5, 0.5], atol=1e-12)
    for out in outcomes:
        branch = out.M @ BELL.amp @ out.U.T
        assert opnorm(branch - np.sqrt(out.q) * SKEW.amp) <= 1e-9
    total = m0.conj().T @ m0 + sum(o.M.conj().T @ o.M for o in outcomes)
    assert opnorm(total - np.eye(2)) <= 1e-9


def test_deterministic_stage_random_completeness():
    rng = np.random.default_rng(47)
    for _ in range(20):
        a_spec, q_spec = comparable_spectra(4, rng)
        a = state_with_spectrum(a_spec, 4, 4, rng)
        q = state_with_spectrum(q_spec, 4, 4, rng)
        outcomes, m0 = deterministic_stage(a, q)
        total = m0.conj().T @ m0 + sum(o.M.conj().T @ o.M for o in outcomes)
        assert opnorm(total - np.eye(4)) <= 1e-9
        for out in outcomes:
            assert opnorm(out.M) <= 1.0 + 1e-10
            assert unitarity_defect(out.U) <= 1e-10
            branch = out.M @ a.amp @ out.U.T
            assert opnorm(branch - np.sqrt(out.q) * q.amp) <= 1e-9


def test_deterministic_stage_rejects_incomparable():
    with pytest.raises(InfeasibleError):
        deterministic_stage(SKEW, BELL)


# ---------------------------------------------------------------------------
# final_contraction
# ---------------------------------------------------------------------------

def test_final_contraction_identity_case():
    n, v, n_fail = final_contraction(SKEW, SKEW, 1.0)
    assert opnorm(n @ SKEW.amp @ v.T - SKEW.amp) <= 1e-12
    assert opnorm(n.conj().T @ n + n_fail.conj().T @ n_fail - np.eye(2)) <= 1e-12


def test_final_contraction_canonical():
    # success amplitudes sqrt(0.4 * 0.5 / 0.8) = 0.5 and sqrt(0.4 * 0.5 / 0.2) = 1
    n, v, n_fail = final_contraction(SKEW, BELL, 0.4)
    x_q = schmidt(SKEW).left_basis
    x_b = schmidt(BELL).left_basis
    in_schmidt = x_b.conj().T @ n @ x_q
    assert np.allclose(in_schmidt, np.diag([0.5, 1.0]), atol=1e-12)
    assert np.allclose(np.linalg.svd(n, compute_uv=False), [1.0, 0.5], atol=1e-12)
    out = n @ SKEW.amp @ v.T
    assert opnorm(out - np.sqrt(0.4) * BELL.amp) <= 1e-12
    assert abs(np.vdot(out, out).real - 0.4) <= 1e-12


def test_final_contraction_saturates_at_pmax():
    rng = np.random.default_rng(48)
    for _ in range(20):
        d = int(rng.integers(2, 6))
        v_spec = random_spectrum(d, rng)
        b_spec = random_spectrum(d, rng)
        p = float(np.min(v_spec / b_spec))
        q = state_with_spectrum(v_spec, d, d, rng)
        b = state_with_spectrum(b_spec, d, d, rng)
        n, _, _ = final_contraction(q, b, p)
        assert abs(opnorm(n) - 1.0) <= 1e-9


def test_final_contraction_rejects_violated_bound():
    with pytest.raises(InfeasibleError):
        final_contraction(BELL, SKEW, 0.9)


# ---------------------------------------------------------------------------
# synthesize
# ---------------------------------------------------------------------------

def test_synthesize_deterministic_bell_to_skew():
    proto = synthesize(BELL, SKEW, 1.0)
    assert proto.stage2 is None
    assert len(proto.outcomes) == 2
    assert abs(sum(o.q for o in proto.outcomes) - 1.0) <= 1e-10
    assert end_to_end_residual(proto, BELL, SKEW) <= 1e-9


def test_synthesize_probabilistic_canonical():
    proto = synthesize(SKEW, BELL, 0.4)
    assert proto.stage2 is not None
    assert len(proto.outcomes) == 1  # intermediate spectrum equals the source one
    x_b = schmidt(BELL).left_basis
    in_schmidt = x_b.conj().T @ proto.stage2.N @ x_b
    assert np.allclose(in_schmidt, np.diag([0.5, 1.0]), atol=1e-12)
    assert end_to_end_residual(proto, SKEW, BELL) <= 1e-9


def test_synthesize_identity():
    rng = np.random.default_rng(49)
    a = random_state(3, 3, rng)
    proto = synthesize(a, a)
    assert proto.stage2 is None
    assert len(proto.outcomes) == 1
    assert end_to_end_residual(proto, a, a) <= 1e-9


def test_synthesize_rejects_excess_p():
    with pytest.raises(InfeasibleError) as exc:
        synthesize(SKEW, BELL, 0.5)
    assert abs(exc.value.p_max - 0.4) <= 1e-12


def test_synthesize_total_probability_and_fidelity():
    rng = np.random.default_rng(50)
    for _ in range(20):
        d = int(rng.integers(2, 5))
        a = random_state(d, d, rng)
        b = random_state(d, d, rng)
        p_max = max_probability(a, b)
        if p_max <= 0.0:
            continue
        for p in (p_max, p_max / 2):
            proto = synthesize(a, b, p)
            assert abs(sum(o.q for o in proto.outcomes) * p - p) <= 1e-9
            assert end_to_end_residual(proto, a, b) <= 1e-9


def test_synthesize_matches_feasibility():
    rng = np.random.default_rng(51)
    agree = 0
    for _ in range(200):
        da, db = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        ra = rng.integers(1, min(da, db) + 1) if rng.random() < 0.3 else None
        a = random_state(da, db, rng, rank=ra)
        b = random_state(da, db, rng)
        p = float(rng.uniform(0.0, 1.0))
        feasible = feasibility(a, b, p).super_maj_ok_at_p
        try:
            synthesize(a, b, p)
            built = True
        except InfeasibleError:
            built = False
        assert built == feasible
        agree += 1
    assert agree == 200


def test_synthesize_m0_branch_is_silent():
    rng = np.random.default_rng(52)
    a = random_state(4, 4, rng, rank=2)
    b = random_state(4, 4, rng, rank=2)
    p = max_probability(a, b)
    proto = synthesize(a, b, min(p, 0.5) if p > 0 else "max")
    weight = float(np.linalg.norm(proto.M0 @ a.amp) ** 2)
    assert weight <= 1e-18


def test_synthesize_outcome_count_bound():
    rng = np.random.default_rng(53)
    for _ in range(20):
        d = int(rng.integers(2, 7))
        a_spec, b_spec = comparable_spectra(d, rng)
        a = state_with_spectrum(a_spec, d, d, rng)
        b = state_with_spectrum(b_spec, d, d, rng)
        proto = synthesize(a, b, "max")
        rank = schmidt_rank(a)
        assert len(proto.outcomes) <= (rank - 1) ** 2 + 1


def test_synthesize_stage2_satisfies_pure_necessity():
    # the spectrum of the intermediate state weakly majorizes p times the
    # target spectrum, as any single-contraction protocol requires
    rng = np.random.default_rng(54)
    for _ in range(20):
        d = int(rng.integers(2, 5))
        a = random_state(d, d, rng)
        b = random_state(d, d, rng)
        p = max_probability(a, b)
        if p <= 0.0 or p >= 1.0:
            continue
        proto = synthesize(a, b, p / 2)
        inter = sum(
            np.sqrt(o.q) * (o.M @ a.amp @ o.U.T) for o in proto.outcomes
        )
        spec_q = np.linalg.svd(inter, compute_uv=False) ** 2
        assert majorize.compare((p / 2) * squared_spectrum(b), spec_q, "sub")


# ---------------------------------------------------------------------------
# reduce_bob
# ---------------------------------------------------------------------------

def test_reduce_bob_identity_operator():
    n, u = reduce_bob(np.eye(2), BELL)
    assert opnorm(BELL.amp @ np.eye(2).T - n @ BELL.amp @ u.T) <= 1e-12


def test_reduce_bob_bell_phase_contraction():
    m = np.diag([1.0, 1.0j])
    n, u = reduce_bob(m, BELL)
    assert opnorm(BELL.amp @ m.T - n @ BELL.amp @ u.T) <= 1e-10
    assert unitarity_defect(u) <= 1e-10
    assert opnorm(n) <= 1.0 + 1e-9


def test_reduce_bob_random():
    rng = np.random.default_rng(55)
    for _ in range(40):
        d = 4
        psi = random_state(d, d, rng)
        m = random_contraction(d, rng)
        n, u = reduce_bob(m, psi)
        assert opnorm(psi.amp @ m.T - n @ psi.amp @ u.T) <= 1e-9
        assert opnorm(n) <= 1.0 + 1e-9
        assert unitarity_defect(u) <= 1e-10


def test_reduce_bob_real_diagonal_degenerate():
    rng = np.random.default_rng(56)
    psi = from_schmidt([0.4, 0.3, 0.3], 3, 3)
    m = np.real(random_contraction(3, rng))
    m = m / max(1.0, np.linalg.norm(m, 2))
    n, u = reduce_bob(m, psi)
    assert opnorm(psi.amp @ m.T - n @ psi.amp @ u.T) <= 1e-12


def test_reduce_bob_rejects_rectangular_state():
    with pytest.raises(UnsupportedShapeError):
        reduce_bob(np.eye(3), from_schmidt([1.0], 2, 3))


def test_reduce_bob_rejects_expansion():
    with pytest.raises(InvalidInputError):
        reduce_bob(2.0 * np.eye(2), BELL)


# ---------------------------------------------------------------------------
# substochastic_matrix
# ---------------------------------------------------------------------------

def test_substochastic_identity_protocol():
    s = substochastic_matrix(np.eye(2), BELL, BELL, 1.0)
    assert np.allclose(s, np.eye(2), atol=1e-12)


def test_substochastic_canonical():
    proto = synthesize(SKEW, BELL, 0.4)
    s = substochastic_matrix(proto.stage2.N, SKEW, BELL, 0.4)
    assert np.allclose(s, np.diag([0.25, 1.0]), atol=1e-12)
    a_spec = squared_spectrum(SKEW)
    b_spec = squared_spectrum(BELL)
    balance = s.T @ a_spec - 0.4 * b_spec
    assert np.allclose(s.T @ a_spec, [0.2, 0.2], atol=1e-12)
    assert np.max(np.abs(balance)) <= 1e-12


def test_substochastic_random_protocols():
    rng = np.random.default_rng(57)
    for _ in range(20):
        d = int(rng.integers(2, 5))
        a = random_state(d, d, rng)
        b = random_state(d, d, rng)
        p = max_probability(a, b)
        if p <= 0.0:
            continue
        p = p / 2 if p < 1.0 else 1.0
        proto = synthesize(a, b, p)
        if proto.stage2 is None:
            continue
        inter_amp = sum(np.sqrt(o.q) * (o.M @ a.amp @ o.U.T) for o in proto.outcomes)
        inter = BipartiteState(inter_amp / np.linalg.norm(inter_amp))
        s = substochastic_matrix(proto.stage2.N, inter, b, p)
        assert np.max(s.sum(axis=0)) <= 1.0 + 1e-10
        assert np.max(s.sum(axis=1)) <= 1.0 + 1e-10
        a_pad = np.zeros(d)
        b_pad = np.zeros(d)
        a_pad[:] = squared_spectrum(inter)
        b_pad[:] = squared_spectrum(b)
        assert np.max(np.abs(s.T @ a_pad - p * b_pad)) <= 1e-9


def test_substochastic_rejects_inconsistent_probability():
    with pytest.raises(InvalidInputError):
        substochastic_matrix(np.eye(2), SKEW, BELL, 0.9)
