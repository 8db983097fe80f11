"""Reduced-rank Kalman estimation of the stacked group channel.

Observations arrive already projected by the pre-beamformer,
``y = Psi^H h + S^H eta`` with ``Psi = x (x) S``. The covariance ``P`` is kept
dense because non-orthogonal pilots couple the delay/user blocks. A
block-diagonal path (:class:`BlockCovariance`) covers the idealized analysis
in which the pilot Gram matrix is replaced by its mean ``E_s M I``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .covariance import ExtendedChannelCovariance
from .training import Measurement

PREDICTED = "predicted"
UPDATED = "updated"


@dataclass(frozen=True)
class KalmanState:
    estimate: np.ndarray
    covariance: np.ndarray
    user_count: int
    epoch: int = 0
    phase: str = PREDICTED


@dataclass(frozen=True)
class InnovationRecord:
    innovation: np.ndarray
    covariance: np.ndarray
    gain: np.ndarray


def _dense(R) -> np.ndarray:
    if isinstance(R, ExtendedChannelCovariance):
        return R.materialize()
    return np.asarray(R, dtype=complex)


def _hermitian(P) -> np.ndarray:
    return 0.5 * (P + P.conj().T)


def init(R_h, user_count: int | None = None) -> KalmanState:
    """Prior ``h_{0|-1} = 0``, ``P_{0|-1} = R_h``."""
    if user_count is None:
        if not isinstance(R_h, ExtendedChannelCovariance):
            raise ValueError("user_count is required for a dense prior covariance")
        user_count = R_h.user_count
    P = _dense(R_h).copy()
    return KalmanState(np.zeros(P.shape[0], dtype=complex), P, user_count, 0, PREDICTED)


def measurement_update(
    state: KalmanState,
    y,
    psi: Measurement,
    r_eta,
    joseph: bool = False,
) -> tuple[KalmanState, InnovationRecord]:
    """Fold one reduced observation ``y`` (length ``D``) into the state."""
    if state.phase != PREDICTED:
        raise ValueError("measurement update needs a predicted state")
    y = np.asarray(y, dtype=complex)
    if y.shape != (psi.D,):
        raise ValueError(f"observation of shape {y.shape} does not match beamspace dimension {psi.D}")
    P = state.covariance
    S = psi.S
    noise = _hermitian(S.conj().T @ np.asarray(r_eta) @ S)
    z = y - psi.adjoint(state.estimate)
    p_psi = psi.right_product(P)
    E = _hermitian(psi.adjoint(p_psi.T).T + noise)
    try:
        factor = linalg.cho_factor(E)
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError("innovation covariance is not positive definite") from exc
    gain = linalg.cho_solve(factor, p_psi.conj().T).conj().T
    estimate = state.estimate + gain @ z
    correction = gain @ p_psi.conj().T
    if joseph:
        P_new = P - correction - correction.conj().T + gain @ E @ gain.conj().T
    else:
        P_new = P - correction
    post = KalmanState(estimate, _hermitian(P_new), state.user_count, state.epoch, UPDATED)
    return post, InnovationRecord(z, E, gain)


def predict(state: KalmanState, alpha: float, R_h) -> KalmanState:
    """One-step prediction ``h <- alpha h``, ``P <- alpha^2 P + (1 - alpha^2) R_h``.

    Also accepted on a predicted state, which covers symbols without
    training.
    """
    return multi_step_predict(state, alpha, R_h, 1)


def multi_step_predict(state: KalmanState, alpha: float, R_h, M: int) -> KalmanState:
    """``M``-step prediction in closed form."""
    if M < 0:
        raise ValueError("M must be nonnegative")
    a_m = alpha**M
    a_2m = alpha ** (2 * M)
    P = a_2m * state.covariance + (1.0 - a_2m) * _dense(R_h)
    return KalmanState(a_m * state.estimate, _hermitian(P), state.user_count, state.epoch + M, PREDICTED)


def mse(state: KalmanState) -> float:
    """``trace(P) / K``."""
    return float(np.real(np.trace(state.covariance))) / state.user_count


def squared_error(state: KalmanState, h) -> float:
    """Realized ``||h - h_hat||^2 / K``."""
    return float(np.sum(np.abs(np.asarray(h) - state.estimate) ** 2)) / state.user_count


def information_form_check(prior: KalmanState, posterior: KalmanState, psi: Measurement, r_eta) -> float:
    """Relative Frobenius residual of ``P_post^-1 = P_prior^-1 + Psi W^-1 Psi^H``.

    ``W = S^H R_eta S``. A singular covariance gives ``inf``.
    """
    try:
        prior_inv = linalg.inv(prior.covariance)
        post_inv = linalg.inv(posterior.covariance)
    except linalg.LinAlgError:
        return float("inf")
    if not (np.all(np.isfinite(prior_inv)) and np.all(np.isfinite(post_inv))):
        return float("inf")
    S = psi.S
    W = S.conj().T @ np.asarray(r_eta) @ S
    psi_dense = psi.dense()
    info = psi_dense @ linalg.solve(W, psi_dense.conj().T, assume_a="her")
    resid = post_inv - (prior_inv + info)
    return float(np.linalg.norm(resid) / np.linalg.norm(post_inv))


def batch_mmse_oracle(
    observations: Sequence[np.ndarray],
    pilots: Sequence[np.ndarray],
    R_h,
    r_eta,
    alpha: float = 1.0,
    beamformer=None,
    max_dim: int = 64,
) -> tuple[np.ndarray, np.ndarray]:
    """Linear MMSE estimate of a static channel from stacked snapshots.

    ``observations[t]`` is the full ``N``-dimensional snapshot taken with
    training vector ``pilots[t]``. With ``beamformer`` given, each snapshot is
    first projected by ``S^H``. Returns the estimate and its error
    covariance.
    """
    if alpha != 1.0:
        raise ValueError("the batch oracle is defined for a static channel (alpha = 1) only")
    R = _dense(R_h)
    dim = R.shape[0]
    if dim > max_dim:
        raise ValueError(f"oracle dimension {dim} exceeds the guard {max_dim}")
    if len(observations) != len(pilots):
        raise ValueError("one training vector is needed per observation")
    if not observations:
        return np.zeros(dim, dtype=complex), R.copy()
    r_eta = np.asarray(r_eta, dtype=complex)
    n = r_eta.shape[0]
    S = np.eye(n, dtype=complex) if beamformer is None else np.asarray(beamformer, dtype=complex)
    phi = np.hstack([np.kron(np.asarray(x)[:, None], S) for x in pilots])
    y = np.concatenate([S.conj().T @ np.asarray(o) for o in observations])
    noise = np.kron(np.eye(len(observations)), S.conj().T @ r_eta @ S)
    gram = phi.conj().T @ R @ phi + noise
    rphi = R @ phi
    gain = linalg.solve(gram, rphi.conj().T, assume_a="her").conj().T
    return gain @ y, _hermitian(R - gain @ rphi.conj().T)


def log_volume(P, basis) -> float:
    """``log det(U^H P U)`` for an orthonormal ``basis`` ``U``."""
    sign, logdet = np.linalg.slogdet(basis.conj().T @ P @ basis)
    return float(logdet) if sign.real > 0 else float("-inf")


def significant_basis(R, rel_tol: float = 1e-10) -> np.ndarray:
    """Eigenvectors of ``R`` whose eigenvalues exceed ``rel_tol`` times the largest."""
    w, v = linalg.eigh(_hermitian(_dense(R)))
    return v[:, w > rel_tol * w.max()]


@dataclass
class BlockCovariance:
    """Covariance of the form ``sum_l I_K (x) E_{L,l} (x) A^l``.

    Closed under the idealized update in which the pilot Gram matrix is
    replaced by ``E_s M I``, so the ``K L`` diagonal blocks evolve
    independently.
    """

    blocks: list[np.ndarray]
    user_count: int

    @classmethod
    def from_extended(cls, R: ExtendedChannelCovariance) -> "BlockCovariance":
        return cls([b.copy() for b in R.blocks], R.user_count)

    def materialize(self) -> np.ndarray:
        return ExtendedChannelCovariance(self.blocks, self.user_count).materialize()

    def trace(self) -> float:
        return self.user_count * float(sum(np.trace(a).real for a in self.blocks))

    def logdet(self) -> float:
        return self.user_count * float(sum(np.linalg.slogdet(a)[1] for a in self.blocks))

    def idealized_update(self, S, r_eta, E_s: float, M: int) -> "BlockCovariance":
        """``A <- A - E_s M A S [S^H R_eta S + E_s M S^H A S]^-1 S^H A`` per block."""
        S = np.asarray(S)
        W = S.conj().T @ r_eta @ S
        out = []
        for a in self.blocks:
            a_s = a @ S
            inner = W + E_s * M * (S.conj().T @ a_s)
            out.append(_hermitian(a - E_s * M * a_s @ linalg.solve(inner, a_s.conj().T, assume_a="her")))
        return BlockCovariance(out, self.user_count)

    def predict(self, alpha: float, M: int, prior: Sequence[np.ndarray]) -> "BlockCovariance":
        keep = alpha ** (2 * M)
        return BlockCovariance([keep * a + (1.0 - keep) * a0 for a, a0 in zip(self.blocks, prior)], self.user_count)


def idealized_update_dense(P, S, r_eta, E_s: float, M: int, memory_users: int) -> np.ndarray:
    """Information-form idealized block update on a dense covariance.

    ``P <- [P^-1 + E_s M (I_{KL} (x) S W^-1 S^H)]^-1``; independent of the
    block-structured path in :class:`BlockCovariance`.
    """
    S = np.asarray(S)
    W = S.conj().T @ r_eta @ S
    info = S @ linalg.solve(W, S.conj().T, assume_a="her")
    total = linalg.inv(P) + E_s * M * np.kron(np.eye(memory_users), info)
    return _hermitian(linalg.inv(total))
