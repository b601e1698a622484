"""Feasibility analysis and explicit protocol synthesis.

Given source and target states ``|A>>`` and ``|B>>``, this module decides
whether one-way LOCC can carry the first into the second with a requested
success probability, computes the maximal achievable probability, and builds
the explicit operators of a two-stage protocol:

* stage 1 performs a *deterministic* transformation onto an intermediate
  state ``|Q>>`` via a complete measurement on Alice's side, each outcome
  corrected by a unitary on Bob's side (the one-way form every LOCC protocol
  on a pure state reduces to);
* stage 2, present only for probabilistic transformations, is a single
  filtering contraction on Alice plus one Bob unitary that succeeds with
  exactly the requested probability.

The intermediate spectrum comes from a closed-form witness of weak
supermajorization; stage 1 is built from a Birkhoff decomposition of the
bistochastic matrix linking the two entanglement spectra (Uhlmann mixing),
pruned to the Caratheodory bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import majorize
from .bipartite import BipartiteState, SchmidtForm, schmidt, schmidt_rank, squared_spectrum
from .errors import InfeasibleError, InvalidInputError, UnsupportedShapeError
from .numkit import (
    DEFAULT_RANK_RTOL,
    as_matrix,
    hermitian_eigs,
    opnorm,
    pinv,
    psd_sqrt,
    rect_diag,
    svd,
    transposition_unitary,
)

#: Slack allowed when a requested probability sits right at the maximum.
FEAS_ATOL = 1e-9


# ---------------------------------------------------------------------------
# feasibility
# ---------------------------------------------------------------------------

def _tail_sums(x: np.ndarray) -> np.ndarray:
    """tails[k] = x[k] + x[k+1] + ... for a decreasingly sorted x."""
    return np.cumsum(x[::-1])[::-1]

def _pmax_from_spectra(a, b, zero_tol: float = 1e-12) -> float:
    """Largest p with spectrum(A) weakly supermajorized by p * spectrum(B).

    Equals the minimum over k of the ratio of tail sums E_k(a) / E_k(b),
    clamped to [0, 1].  Vanishing tails of b impose no constraint; a
    vanishing tail of a against a positive tail of b forces 0.
    """
    av, bv = majorize._pad_pair(np.sort(a)[::-1], np.sort(b)[::-1])
    ta = _tail_sums(av)
    tb = _tail_sums(bv)
    p = 1.0
    for ea, eb in zip(ta, tb):
        if eb <= zero_tol:
            continue
        if ea <= zero_tol:
            return 0.0
        p = min(p, ea / eb)
    if p > 1.0 - 1e-12:
        # Ratios pinned to 1 by rounding crumbs mean a deterministic pair.
        return 1.0
    return max(p, 0.0)


def max_probability(a_state: BipartiteState, b_state: BipartiteState) -> float:
    """Maximal LOCC success probability for the transformation A -> B."""
    if a_state.dims != b_state.dims:
        raise InvalidInputError(f"dimension mismatch: {a_state.dims} vs {b_state.dims}")
    return _pmax_from_spectra(squared_spectrum(a_state), squared_spectrum(b_state))


@dataclass(frozen=True)
class FeasibilityReport:
    """All majorization and rank verdicts for a transformation A -> B."""

    p_requested: float | str
    p_max: float
    deterministic_ok: bool
    rank_ok: bool
    super_maj_ok_at_p: bool
    pure_necessary_ok_at_p: bool
    schmidt_sq_a: np.ndarray
    schmidt_sq_b: np.ndarray

    def as_dict(self) -> dict:
        return {
            "p_requested": self.p_requested,
            "p_max": self.p_max,
            "deterministic_ok": self.deterministic_ok,
            "rank_ok": self.rank_ok,
            "super_maj_ok_at_p": self.super_maj_ok_at_p,
            "pure_necessary_ok_at_p": self.pure_necessary_ok_at_p,
            "schmidt_sq_A": list(map(float, self.schmidt_sq_a)),
            "schmidt_sq_B": list(map(float, self.schmidt_sq_b)),
        }


def _resolve_p(p, p_max: float) -> float:
    if isinstance(p, str):
        if p != "max":
            raise InvalidInputError(f"p must be a float in [0, 1] or 'max', got {p!r}")
        return p_max
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    return p


def feasibility(a_state: BipartiteState, b_state: BipartiteState, p="max") -> FeasibilityReport:
    """Full feasibility report for A -> B at probability ``p`` (or ``"max"``).

    Infeasibility is reported, never raised.
    """
    if a_state.dims != b_state.dims:
        raise InvalidInputError(f"dimension mismatch: {a_state.dims} vs {b_state.dims}")
    a = squared_spectrum(a_state)
    b = squared_spectrum(b_state)
    p_max = _pmax_from_spectra(a, b)
    p_num = _resolve_p(p, p_max)
    return FeasibilityReport(
        p_requested=p if isinstance(p, str) else float(p),
        p_max=p_max,
        deterministic_ok=majorize.compare(a, b, "maj"),
        rank_ok=schmidt_rank(a_state) >= schmidt_rank(b_state),
        super_maj_ok_at_p=majorize.compare(a, p_num * b, "super"),
        pure_necessary_ok_at_p=majorize.compare(p_num * b, a, "sub"),
        schmidt_sq_a=a,
        schmidt_sq_b=b,
    )


# ---------------------------------------------------------------------------
# protocol building blocks
# ---------------------------------------------------------------------------

def intermediate_vector(a, b, p: float) -> np.ndarray:
    """Spectrum of the intermediate state splitting a probabilistic protocol.

    For squared Schmidt vectors ``a`` (source) and ``b`` (target) with
    ``p <= p_max``, returns ``v = (p*b1 + (1-p), p*b2, ..., p*bd)``.  This v
    sums to one, dominates ``p*b`` componentwise, is non-increasing, and
    majorizes ``a``, so A -> V is reachable deterministically and V -> B by a
    single filtering contraction of success weight p.
    """
    av = np.sort(majorize._clean_vector(a))[::-1]
    bv = np.sort(majorize._clean_vector(b))[::-1]
    av, bv = majorize._pad_pair(av, bv)
    if abs(av.sum() - 1.0) > 1e-8 or abs(bv.sum() - 1.0) > 1e-8:
        raise InvalidInputError("squared Schmidt vectors must sum to 1")
    p = float(p)
    p_max = _pmax_from_spectra(av, bv)
    if p > p_max + FEAS_ATOL:
        raise InfeasibleError(
            f"requested probability {p} exceeds the maximum {p_max}", p_max=p_max
        )
    v = p * bv
    v[0] += 1.0 - p
    return v


def uhlmann_decompose(c, d) -> list[tuple[float, np.ndarray]]:
    """Mixing of unitary conjugates of ``d`` that averages to ``c``.

    For Hermitian operators with eigenvalues(c) majorized by eigenvalues(d),
    returns weights and unitaries with ``sum w * W @ d @ W.conj().T == c``
    and at most ``(r-1)**2 + 1`` terms, r being the effective spectral
    support size.

    Each ``W`` has the form ``U_c @ P @ U_d.conj().T`` with eigenbases of c
    and d around a permutation ``P`` of the Birkhoff decomposition linking
    the two spectra; the permutation orientation is the one that makes the
    reconstruction identity hold (verified by the reconstruction tests).
    """
    cm = as_matrix(c)
    dm = as_matrix(d)
    if cm.shape != dm.shape or cm.shape[0] != cm.shape[1]:
        raise InvalidInputError("uhlmann_decompose needs two square matrices of equal size")
    e_c, u_c = hermitian_eigs(cm)
    e_d, u_d = hermitian_eigs(dm)
    if not majorize.compare(e_c, e_d, "maj"):
        raise InfeasibleError("eigenvalues(c) are not majorized by eigenvalues(d)")
    terms, block = _mixing_terms(np.clip(e_c, 0.0, None), np.clip(e_d, 0.0, None))
    n = cm.shape[0]
    out = []
    for w, perm in terms:
        p_full = np.eye(n)
        p_full[:block, :block] = majorize.BirkhoffDecomposition.permutation_matrix(perm)
        out.append((w, u_c @ p_full @ u_d.conj().T))
    return out


def _support_size(x: np.ndarray, rank_rtol: float) -> int:
    top = float(np.max(x)) if x.size else 0.0
    if top <= 0.0:
        return 1
    return max(1, int(np.sum(x > (rank_rtol**2) * top)))


def _mixing_terms(a: np.ndarray, q: np.ndarray, rank_rtol: float = DEFAULT_RANK_RTOL):
    """Birkhoff terms routing spectrum ``q`` onto spectrum ``a`` (``a < q``).

    Works on the top block covering both spectral supports so the term count
    obeys the Caratheodory bound for the *rank*, not the full dimension; the
    returned permutations act on that block.
    """
    a_s = np.sort(a)[::-1]
    q_s = np.sort(q)[::-1]
    a_s, q_s = majorize._pad_pair(a_s, q_s)
    block = max(_support_size(a_s, rank_rtol), _support_size(q_s, rank_rtol))
    link = majorize.bistochastic_link(a_s[:block], q_s[:block])
    dec = majorize.birkhoff(link, tol=1e-12)
    dec = majorize.caratheodory_prune(dec, block)
    return list(dec.terms), block


@dataclass(frozen=True)
class StageOneOutcome:
    """One measurement branch: Alice contraction M, Bob correction U, weight q."""

    q: float
    M: np.ndarray
    U: np.ndarray


@dataclass(frozen=True)
class StageTwo:
    """Filtering step: contraction N and unitary V succeed with weight p;
    N_fail completes the instrument (N'N + N_fail'N_fail = I)."""

    p: float
    N: np.ndarray
    V: np.ndarray
    N_fail: np.ndarray


@dataclass(frozen=True)
class LoccProtocol:
    """Explicit operators of a synthesized one-way protocol."""

    outcomes: tuple[StageOneOutcome, ...]
    M0: np.ndarray
    stage2: StageTwo | None
    dims: tuple[int, int]
    p_total: float
    source_digest: str | None = None
    target_digest: str | None = None


def deterministic_stage(
    a_state: BipartiteState,
    q_state: BipartiteState,
    rank_rtol: float = DEFAULT_RANK_RTOL,
    null_terms=None,
) -> tuple[list[StageOneOutcome], np.ndarray]:
    """Complete measurement carrying ``|A>>`` onto ``|Q>>`` with certainty.

    Requires spectrum(A) majorized by spectrum(Q).  Every outcome satisfies
    ``(M (x) U) |A>> = sqrt(q) |Q>>`` and the contractions resolve the
    projector onto the range of A; ``M0 = I - A A^+`` completes the
    measurement on the orthogonal complement, where the source state has no
    amplitude.

    ``null_terms`` optionally supplies one extra operator per outcome acting
    on that complement (added as ``T @ (I - A A^+)``); the default protocol
    never populates it.
    """
    if a_state.dims != q_state.dims:
        raise InvalidInputError(f"dimension mismatch: {a_state.dims} vs {q_state.dims}")
    da, db = a_state.dims
    fa = schmidt(a_state)
    fq = schmidt(q_state)
    a = fa.coeffs**2
    q = fq.coeffs**2
    if not majorize.compare(a, q, "maj"):
        raise InfeasibleError("spectrum(A) is not majorized by spectrum(Q)")

    terms, block = _mixing_terms(a, q, rank_rtol)
    a_pinv = pinv(a_state.amp, rank_rtol)
    projector_defect = np.eye(da) - a_state.amp @ a_pinv

    if null_terms is not None and len(null_terms) != len(terms):
        raise InvalidInputError("null_terms must provide one operator per outcome")

    outcomes = []
    for idx, (w, perm) in enumerate(terms):
        p_bob = np.eye(db)
        p_bob[:block, :block] = majorize.BirkhoffDecomposition.permutation_matrix(perm).T
        u_star = fq.right_basis.conj().T @ p_bob @ fa.right_basis
        m = np.sqrt(w) * q_state.amp @ u_star @ a_pinv
        if null_terms is not None:
            m = m + as_matrix(null_terms[idx]) @ projector_defect
        outcomes.append(StageOneOutcome(q=float(w), M=m, U=u_star.conj()))
    return outcomes, projector_defect


def final_contraction(
    q_state: BipartiteState,
    b_state: BipartiteState,
    p: float,
    rank_rtol: float = DEFAULT_RANK_RTOL,
    schmidt_q: SchmidtForm | None = None,
    schmidt_b: SchmidtForm | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single filtering step mapping ``|Q>>`` to ``|B>>`` with weight ``p``.

    Returns ``(N, V, N_fail)`` with ``N @ amp_Q @ V.T == sqrt(p) * amp_B``,
    ``||N|| <= 1`` and ``N_fail`` the principal square root of ``I - N'N``.
    Requires the componentwise bound spectrum(Q) >= p * spectrum(B) on the
    sorted spectra, which caps every singular value of N at one.
    """
    if q_state.dims != b_state.dims:
        raise InvalidInputError(f"dimension mismatch: {q_state.dims} vs {b_state.dims}")
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    da, db = q_state.dims
    fq = schmidt_q if schmidt_q is not None else schmidt(q_state)
    fb = schmidt_b if schmidt_b is not None else schmidt(b_state)
    v = fq.coeffs**2
    b = fb.coeffs**2
    if np.min(v - p * b) < -FEAS_ATOL:
        raise InfeasibleError("spectrum(Q) does not dominate p * spectrum(B) componentwise")

    top = fq.coeffs[0] if fq.coeffs.size else 0.0
    keep = fq.coeffs > rank_rtol * top
    inv_q = np.where(keep, 1.0 / np.where(keep, fq.coeffs, 1.0), 0.0)
    sigma_b = rect_diag(fb.coeffs, da, db)
    sigma_q_pinv = rect_diag(inv_q, db, da)
    n = np.sqrt(p) * fb.left_basis @ sigma_b @ sigma_q_pinv @ fq.left_basis.conj().T
    v_t = fq.right_basis.conj().T @ fb.right_basis
    n_fail = psd_sqrt(np.eye(da) - n.conj().T @ n)
    return n, v_t.T, n_fail


def synthesize(
    a_state: BipartiteState,
    b_state: BipartiteState,
    p="max",
    rank_rtol: float = DEFAULT_RANK_RTOL,
) -> LoccProtocol:
    """Build the full protocol transforming ``|A>>`` into ``|B>>`` at probability p.

    ``p`` may be a float or ``"max"``.  The intermediate state reuses the
    Schmidt bases of the target, which makes the stage-2 Bob correction the
    identity.  At ``p == 1`` the transformation is deterministic and stage 2
    is omitted.  Raises :class:`InfeasibleError` (carrying ``p_max``) when
    the request is out of reach.
    """
    if a_state.dims != b_state.dims:
        raise InvalidInputError(f"dimension mismatch: {a_state.dims} vs {b_state.dims}")
    da, db = a_state.dims
    p_max = max_probability(a_state, b_state)
    p_num = _resolve_p(p, p_max)
    if p_num > p_max + FEAS_ATOL:
        raise InfeasibleError(
            f"requested probability {p_num} exceeds the maximum {p_max}", p_max=p_max
        )
    p_num = min(p_num, p_max)

    if p_num >= 1.0 - FEAS_ATOL and majorize.compare(
        squared_spectrum(a_state), squared_spectrum(b_state), "maj"
    ):
        outcomes, m0 = deterministic_stage(a_state, b_state, rank_rtol)
        stage2 = None
        p_total = 1.0
    else:
        fb = schmidt(b_state)
        v = intermediate_vector(squared_spectrum(a_state), fb.coeffs**2, p_num)
        coeffs_q = np.sqrt(v)
        q_state = BipartiteState(fb.left_basis @ rect_diag(coeffs_q, da, db) @ fb.right_basis)
        fq = SchmidtForm(left_basis=fb.left_basis, coeffs=coeffs_q, right_basis=fb.right_basis)
        outcomes, m0 = deterministic_stage(a_state, q_state, rank_rtol)
        n, v_op, n_fail = final_contraction(
            q_state, b_state, p_num, rank_rtol, schmidt_q=fq, schmidt_b=fb
        )
        stage2 = StageTwo(p=p_num, N=n, V=v_op, N_fail=n_fail)
        p_total = p_num

    return LoccProtocol(
        outcomes=tuple(outcomes),
        M0=m0,
        stage2=stage2,
        dims=(da, db),
        p_total=float(p_total),
        source_digest=a_state.digest,
        target_digest=b_state.digest,
    )


# ---------------------------------------------------------------------------
# single-operator reductions and diagnostics
# ---------------------------------------------------------------------------

def reduce_bob(m, psi: BipartiteState) -> tuple[np.ndarray, np.ndarray]:
    """Trade a Bob-side contraction for an Alice-side one plus a Bob unitary.

    For a square state ``psi`` and a contraction ``m`` on Bob's system,
    returns ``(N, U)`` with ``amp @ m.T == N @ amp @ U.T``, ``U`` unitary and
    ``||N|| <= ||m||``.  Built from the transposition unitaries of the
    amplitude matrix and of ``m @ amp.T``.

    Only square amplitude matrices are supported: the transposition unitary
    is defined for square operators only.
    """
    da, db = psi.dims
    if da != db:
        raise UnsupportedShapeError(
            f"reduce_bob needs a square amplitude matrix, got {da} x {db}"
        )
    mm = as_matrix(m)
    if mm.shape != (db, db):
        raise InvalidInputError(f"operator shape {mm.shape} does not act on dim {db}")
    if opnorm(mm) > 1.0 + 1e-10:
        raise InvalidInputError("operator is not a contraction (||m|| > 1)")
    k_psi = transposition_unitary(psi.amp)
    k_mpt = transposition_unitary(mm @ psi.amp.T)
    n = k_mpt @ mm @ k_psi
    u = k_mpt.conj().T @ k_psi.conj().T
    return n, u


def substochastic_matrix(m, source: BipartiteState, target: BipartiteState, p: float) -> np.ndarray:
    """Outcome-flow matrix of an Alice contraction in the Schmidt bases.

    For ``m`` realizing a single-shot transformation source -> target with
    success weight ``p`` (i.e. ``m @ amp_source @ u.T == sqrt(p) * amp_target``
    for some unitary u), returns the real matrix ``S`` with
    ``S[k, l] = |Mt[l, k]|**2`` where ``Mt`` conjugates ``m`` by the left
    Schmidt bases of target and source.  S has row and column sums at most 1
    and routes the source spectrum onto p times the target spectrum:
    ``S.T @ spectrum(source) == p * spectrum(target)``.

    Raises :class:`InvalidInputError` when the inputs clearly do not form
    such a protocol (flow balance off by more than 1e-6).
    """
    if source.dims != target.dims:
        raise InvalidInputError(f"dimension mismatch: {source.dims} vs {target.dims}")
    s = _flow_matrix(m, source, target)
    da = source.dims[0]
    a_pad = np.zeros(da)
    b_pad = np.zeros(da)
    sa = squared_spectrum(source)
    sb = squared_spectrum(target)
    a_pad[: len(sa)] = sa
    b_pad[: len(sb)] = sb
    if np.max(np.abs(s.T @ a_pad - float(p) * b_pad)) > 1e-6:
        raise InvalidInputError(
            "operators do not realize a single-shot protocol at this probability"
        )
    return s


def _flow_matrix(m, source: BipartiteState, target: BipartiteState) -> np.ndarray:
    """|entries|^2 of the Alice operator conjugated into the Schmidt bases."""
    mm = as_matrix(m)
    da = source.dims[0]
    if mm.shape != (da, da):
        raise InvalidInputError(f"operator shape {mm.shape} does not act on dim {da}")
    x_a = svd(source.amp).x
    x_b = svd(target.amp).x
    mt = x_b.conj().T @ mm @ x_a
    return (np.abs(mt) ** 2).T
