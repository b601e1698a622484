"""Protocol verification and seeded Monte Carlo execution.

``verify`` recomputes every defining identity of a synthesized protocol and
reports the residuals; ``run_once``/``estimate`` execute the protocol as a
sampled measurement with classical communication.  Outcome probabilities are
always recomputed from the operators acting on the state (never taken from
the nominal stage-1 weights), so simulation independently cross-checks the
synthesis formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bipartite import BipartiteState, fidelity
from .errors import InvalidInputError
from .numkit import opnorm, unitarity_defect
from .synth import LoccProtocol, _flow_matrix


@dataclass(frozen=True)
class VerificationReport:
    """Residuals of all protocol identities.

    completeness_residual        operator-norm defect of sum M'M + M0'M0 = I
    per_outcome_residuals        per branch: || M A U.T - sqrt(q) Q ||
    stage2_residual              max of the stage-2 map defect
                                 || N Q V.T - sqrt(p) B || and the
                                 instrument completion defect
                                 || N'N + N_fail'N_fail - I || (0 if absent)
    unitarity_residuals          || U'U - I || for every Bob unitary (and V)
    norm_bounds                  contraction excesses max(0, ||.|| - 1)
    substochastic_balance_residual
                                 stage-2 flow-balance and row/column-sum
                                 excess of the outcome-flow matrix
    """

    completeness_residual: float
    per_outcome_residuals: tuple[float, ...]
    stage2_residual: float
    unitarity_residuals: tuple[float, ...]
    norm_bounds: tuple[float, ...]
    substochastic_balance_residual: float
    tol: float
    passed: bool

    @property
    def max_residual(self) -> float:
        return max(
            self.completeness_residual,
            max(self.per_outcome_residuals, default=0.0),
            self.stage2_residual,
            max(self.unitarity_residuals, default=0.0),
            max(self.norm_bounds, default=0.0),
            self.substochastic_balance_residual,
        )

    def as_dict(self) -> dict:
        return {
            "completeness_residual": self.completeness_residual,
            "per_outcome_residuals": list(self.per_outcome_residuals),
            "stage2_residual": self.stage2_residual,
            "unitarity_residuals": list(self.unitarity_residuals),
            "norm_bounds": list(self.norm_bounds),
            "substochastic_balance_residual": self.substochastic_balance_residual,
            "max_residual": self.max_residual,
            "tol": self.tol,
            "passed": self.passed,
        }


def verify(
    protocol: LoccProtocol,
    a_state: BipartiteState,
    b_state: BipartiteState,
    tol: float = 1e-9,
) -> VerificationReport:
    """Check every identity a valid protocol must satisfy.

    The intermediate state of a probabilistic protocol is reconstructed as
    the weighted average of the stage-1 branch outputs, so a corrupted
    operator shows up either in the branch residuals, in completeness, or in
    the stage-2 map residual.
    """
    da, db = protocol.dims
    if a_state.dims != (da, db) or b_state.dims != (da, db):
        raise InvalidInputError("state dimensions do not match the protocol")

    ident_a = np.eye(da)
    acc = protocol.M0.conj().T @ protocol.M0
    for out in protocol.outcomes:
        acc = acc + out.M.conj().T @ out.M
    completeness = opnorm(acc - ident_a)

    branches = [out.M @ a_state.amp @ out.U.T for out in protocol.outcomes]
    if protocol.stage2 is None:
        target = b_state.amp
    else:
        target = sum(math.sqrt(out.q) * br for out, br in zip(protocol.outcomes, branches))
    per_outcome = tuple(
        opnorm(br - math.sqrt(out.q) * target)
        for out, br in zip(protocol.outcomes, branches)
    )

    unitarity = [unitarity_defect(out.U) for out in protocol.outcomes]
    norms = [max(0.0, opnorm(out.M) - 1.0) for out in protocol.outcomes]
    norms.append(max(0.0, opnorm(protocol.M0) - 1.0))

    if protocol.stage2 is None:
        stage2_residual = 0.0
        balance = 0.0
    else:
        s2 = protocol.stage2
        unitarity.append(unitarity_defect(s2.V))
        norms.append(max(0.0, opnorm(s2.N) - 1.0))
        map_defect = opnorm(s2.N @ target @ s2.V.T - math.sqrt(s2.p) * b_state.amp)
        completion = opnorm(s2.N.conj().T @ s2.N + s2.N_fail.conj().T @ s2.N_fail - ident_a)
        stage2_residual = max(map_defect, completion)

        norm_t = float(np.linalg.norm(target))
        inter = BipartiteState(target / norm_t) if norm_t > 0 else None
        if inter is None:
            balance = float("inf")
        else:
            flow = _flow_matrix(s2.N, inter, b_state)
            spec_q = np.linalg.svd(inter.amp, compute_uv=False) ** 2
            spec_b = np.linalg.svd(b_state.amp, compute_uv=False) ** 2
            a_pad = np.zeros(da)
            b_pad = np.zeros(da)
            a_pad[: len(spec_q)] = spec_q
            b_pad[: len(spec_b)] = spec_b
            balance = float(np.max(np.abs(flow.T @ a_pad - s2.p * b_pad)))
            balance = max(
                balance,
                max(0.0, float(np.max(flow.sum(axis=0))) - 1.0),
                max(0.0, float(np.max(flow.sum(axis=1))) - 1.0),
            )

    report = VerificationReport(
        completeness_residual=float(completeness),
        per_outcome_residuals=per_outcome,
        stage2_residual=float(stage2_residual),
        unitarity_residuals=tuple(unitarity),
        norm_bounds=tuple(norms),
        substochastic_balance_residual=float(balance),
        tol=float(tol),
        passed=False,
    )
    object.__setattr__(report, "passed", bool(report.max_residual <= tol))
    return report


@dataclass(frozen=True)
class RunTrace:
    """Record of one sampled protocol execution.

    ``outcome_index`` is the stage-1 branch (-1 for the completion operator
    M0, whose weight vanishes on the source state); ``classical_message`` is
    the index Alice sends; ``bob_correction`` is the index of the unitary Bob
    applied, or None when none was.  ``run_weight`` is the probability of the
    realized trajectory.
    """

    outcome_index: int
    classical_message: int
    bob_correction: int | None
    stage2_success: bool | None
    final_state: BipartiteState | None
    run_weight: float


def branch_weights(protocol: LoccProtocol, state: BipartiteState) -> np.ndarray:
    """Exact probabilities of every stage-1 branch (M0 last) on ``state``."""
    ops = [out.M for out in protocol.outcomes] + [protocol.M0]
    return np.array(
        [float(np.vdot(op @ state.amp, op @ state.amp).real) for op in ops]
    )


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent, reproducible generator for one trial.

    Streams are split with a counter-based generator jumped by the trial
    index, so the result depends only on ``(seed, trial)`` and never on
    execution order.
    """
    return np.random.Generator(np.random.Philox(key=seed).jumped(trial))


def run_once(protocol: LoccProtocol, state: BipartiteState, rng: np.random.Generator) -> RunTrace:
    """Sample one execution of a verified protocol on ``state``."""
    weights = branch_weights(protocol, state)
    total = float(weights.sum())
    pick = rng.random() * total
    idx = int(np.searchsorted(np.cumsum(weights), pick))
    idx = min(idx, len(weights) - 1)

    if idx == len(protocol.outcomes):
        # Completion branch: no amplitude survives, Bob does nothing.
        return RunTrace(
            outcome_index=-1,
            classical_message=-1,
            bob_correction=None,
            stage2_success=None,
            final_state=None,
            run_weight=float(weights[idx]),
        )

    out = protocol.outcomes[idx]
    branch = out.M @ state.amp @ out.U.T
    w = float(np.vdot(branch, branch).real)
    inter = branch / math.sqrt(w)

    if protocol.stage2 is None:
        return RunTrace(
            outcome_index=idx,
            classical_message=idx,
            bob_correction=idx,
            stage2_success=None,
            final_state=BipartiteState(inter),
            run_weight=w,
        )

    s2 = protocol.stage2
    success_amp = s2.N @ inter @ s2.V.T
    w_succ = float(np.vdot(success_amp, success_amp).real)
    if rng.random() < w_succ:
        final = BipartiteState(success_amp / math.sqrt(w_succ))
        return RunTrace(
            outcome_index=idx,
            classical_message=idx,
            bob_correction=idx,
            stage2_success=True,
            final_state=final,
            run_weight=w * w_succ,
        )
    fail_amp = s2.N_fail @ inter
    w_fail = float(np.vdot(fail_amp, fail_amp).real)
    final = BipartiteState(fail_amp / math.sqrt(w_fail)) if w_fail > 1e-30 else None
    return RunTrace(
        outcome_index=idx,
        classical_message=idx,
        bob_correction=idx,
        stage2_success=False,
        final_state=final,
        run_weight=w * w_fail,
    )


class EstimateResult(NamedTuple):
    p_hat: float
    mean_success_fidelity: float
    stderr: float


def estimate(
    protocol: LoccProtocol,
    a_state: BipartiteState,
    b_state: BipartiteState,
    trials: int,
    seed: int = 0,
) -> EstimateResult:
    """Monte Carlo estimate of the protocol's success statistics.

    Per-trial randomness is a pure function of ``(seed, trial index)``, so
    repeated calls (or any execution order over the trials) give bit-identical
    results.  ``mean_success_fidelity`` is NaN when no trial succeeded.
    """
    if trials < 1:
        raise InvalidInputError("trials must be at least 1")
    successes = 0
    fid_sum = 0.0
    for i in range(trials):
        trace = run_once(protocol, a_state, trial_rng(seed, i))
        succeeded = (
            trace.outcome_index >= 0
            and (trace.stage2_success is None or trace.stage2_success)
        )
        if succeeded:
            successes += 1
            fid_sum += fidelity(trace.final_state, b_state)
    p_hat = successes / trials
    mean_fid = fid_sum / successes if successes else float("nan")
    stderr = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / trials)
    return EstimateResult(p_hat=p_hat, mean_success_fidelity=mean_fid, stderr=stderr)
