"""Statistical pre-beamformers.

The generalized eigenvector beamformer (GEB) draws its columns from the
generalized eigenvectors of each delay's pencil ``(rho_l R_l, R_eta)``. The
sequential variant re-selects columns every block of ``M`` symbols from a
per-delay ledger of SNR eigenvalues that tracks how much each eigen-direction
has already been learned. The conventional baseline keeps the dominant
eigenvectors of the summed intended-group covariance ("DFT beamspace").
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .covariance import ArrayGeometry, steering_matrix

EIGENVALUE_FLOOR = 1e-14
SPAN_TOLERANCE = 1e-8
PATTERN_FLOOR_DB = -300.0


@dataclass(frozen=True)
class GeneralizedEigenPair:
    """``A V = B V diag(values)`` with ``V^H B V = I`` and descending values."""

    vectors: np.ndarray
    values: np.ndarray


def generalized_eigendecomposition(A, B) -> GeneralizedEigenPair:
    """Solve the Hermitian-definite pencil ``(A, B)``.

    Eigenvectors are scaled to be B-orthonormal. Eigenvalues below
    ``EIGENVALUE_FLOOR`` are set to zero. A ``B`` that is not positive
    definite raises :class:`numpy.linalg.LinAlgError`.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    values, vectors = linalg.eigh(0.5 * (A + A.conj().T), 0.5 * (B + B.conj().T))
    values = values[::-1].copy()
    values[values < EIGENVALUE_FLOOR] = 0.0
    return GeneralizedEigenPair(vectors[:, ::-1].copy(), values)


def delay_eigenpairs(spatial: Sequence[np.ndarray], pdp: Sequence[float], r_eta) -> list[GeneralizedEigenPair]:
    return [generalized_eigendecomposition(rho * np.asarray(r), r_eta) for rho, r in zip(pdp, spatial)]


@dataclass
class SnrLedger:
    """Per-delay SNR eigenvalues: current (``values``) and initial (``initial``)."""

    values: list[np.ndarray]
    initial: list[np.ndarray]
    epoch: int = 0

    @classmethod
    def from_eigenpairs(cls, pairs: Sequence[GeneralizedEigenPair]) -> "SnrLedger":
        return cls([p.values.copy() for p in pairs], [p.values.copy() for p in pairs], 0)

    @property
    def memory(self) -> int:
        return len(self.values)

    @property
    def size(self) -> int:
        return sum(v.size for v in self.values)


def _pooled_order(values: Sequence[np.ndarray]) -> list[tuple[int, int]]:
    """All ``(delay, index)`` pairs by descending value; ties go to lower delay, then lower index."""
    lam = np.concatenate(values)
    delay = np.concatenate([np.full(v.size, l) for l, v in enumerate(values)])
    index = np.concatenate([np.arange(v.size) for v in values])
    order = np.lexsort((index, delay, -lam))
    return [(int(delay[o]), int(index[o])) for o in order]


def _group(pairs, memory: int) -> list[np.ndarray]:
    sets = [[] for _ in range(memory)]
    for l, i in pairs:
        sets[l].append(i)
    return [np.array(sorted(s), dtype=int) for s in sets]


def allocate_dimensions(ledger: SnrLedger, D: int, K_g: int = 1, E_s: float = 1.0, M: int = 1) -> list[np.ndarray]:
    """Index sets maximizing the separable determinant metric.

    ``log F`` is a sum of increasing per-eigenvalue terms, so the maximizer
    keeps the ``D`` largest eigenvalues pooled over all delays. ``K_g``,
    ``E_s`` and ``M`` scale the metric but never change the argmax.
    """
    if D < 0 or D > ledger.size:
        raise ValueError(f"D={D} must lie in 0..{ledger.size}")
    return _group(_pooled_order(ledger.values)[:D], ledger.memory)


def det_metric(ledger: SnrLedger, selection: Sequence[np.ndarray], K_g: int, E_s: float, M: int) -> float:
    """``log F = K_g sum_l sum_{i in I^l} log(1 + E_s M lambda^l_i)``."""
    total = 0.0
    for lam, idx in zip(ledger.values, selection):
        total += np.sum(np.log1p(E_s * M * lam[np.asarray(idx, dtype=int)]))
    return K_g * float(total)


def update_ledger(
    ledger: SnrLedger,
    selected: Sequence[np.ndarray],
    E_s: float,
    M: int,
    alpha: float,
    train_symbols: int | None = None,
) -> SnrLedger:
    """Advance the ledger by one block.

    Selected eigenvalues shrink to ``lambda / (1 + E_s T lambda)`` (``T``
    training symbols per block, ``M`` by default), then every entry relaxes
    toward its initial value with weight ``alpha^(2M)``.
    """
    gain = E_s * (M if train_symbols is None else train_symbols)
    keep = alpha ** (2 * M)
    values = []
    for lam, lam0, idx in zip(ledger.values, ledger.initial, selected):
        lam = lam.copy()
        idx = np.asarray(idx, dtype=int)
        lam[idx] = lam[idx] / (1.0 + gain * lam[idx])
        values.append(keep * lam + (1.0 - keep) * lam0)
    return SnrLedger(values, ledger.initial, ledger.epoch + 1)


@dataclass
class Beamformer:
    """An ``N x D`` pre-beamformer.

    For GEBs ``blocks[l]`` holds the columns taken from delay ``l``,
    ``selection[l]`` their eigen-indices, and ``covered[l]`` every index of
    delay ``l`` whose eigenvector lies in the span of the columns (a superset
    of ``selection[l]``). ``overlap`` is the largest cross-delay
    ``|v^H R_eta v'|`` among the selected eigenvectors before they were
    re-orthonormalized; it is zero when per-delay eigenspaces are orthogonal.
    """

    columns: np.ndarray
    kind: str
    blocks: list[np.ndarray] = field(default_factory=list)
    selection: list[np.ndarray] = field(default_factory=list)
    covered: list[np.ndarray] = field(default_factory=list)
    selected_values: list[np.ndarray] = field(default_factory=list)
    overlap: float = 0.0

    @property
    def dimension(self) -> int:
        return self.columns.shape[1]


def _assemble(pairs: Sequence[GeneralizedEigenPair], order, D: int, r_eta, values, kind: str) -> Beamformer:
    """Walk candidates in ``order`` and keep ``D`` independent ones.

    Columns are Gram-Schmidt orthonormalized in the ``R_eta`` inner product.
    A candidate already inside the current span adds no new column. When the
    per-delay eigenspaces are mutually R_eta-orthogonal this reduces to
    taking the first ``D`` candidates unchanged.
    """
    n = r_eta.shape[0]
    if D > n:
        raise ValueError(f"a beamformer on {n} antennas cannot have D={D} independent columns")
    basis = np.zeros((n, 0), dtype=complex)
    picked = []
    for l, i in order:
        if len(picked) == D:
            break
        v = pairs[l].vectors[:, i]
        r = v.copy()
        for _ in range(2):
            r = r - basis @ (basis.conj().T @ (r_eta @ r))
        norm2 = np.real(r.conj() @ r_eta @ r)
        if norm2 <= SPAN_TOLERANCE * np.real(v.conj() @ r_eta @ v):
            continue
        basis = np.column_stack([basis, r / np.sqrt(norm2)])
        picked.append((l, i))
    if len(picked) < D:
        raise ValueError(f"only {len(picked)} independent directions are available, D={D} requested")

    memory = len(pairs)
    covered = []
    proj = basis.conj().T @ r_eta
    for l, p in enumerate(pairs):
        resid = p.vectors - basis @ (proj @ p.vectors)
        norm2 = np.real(np.einsum("ij,ik,kj->j", resid.conj(), r_eta, resid))
        covered.append(np.flatnonzero(norm2 <= SPAN_TOLERANCE))

    col_delay = np.array([l for l, _ in picked], dtype=int)
    order_by_delay = np.argsort(col_delay, kind="stable")
    columns = basis[:, order_by_delay]
    picked_sorted = [picked[j] for j in order_by_delay]
    blocks = [columns[:, col_delay[order_by_delay] == l] for l in range(memory)]
    selection = _group(picked_sorted, memory)
    selected_values = [values[l][selection[l]] for l in range(memory)]

    raw = np.column_stack([pairs[l].vectors[:, i] for l, i in picked_sorted]) if picked else basis
    gram = np.abs(raw.conj().T @ r_eta @ raw)
    same = col_delay[order_by_delay][:, None] == col_delay[order_by_delay][None, :]
    overlap = float(gram[~same].max()) if np.any(~same) else 0.0
    return Beamformer(columns, kind, blocks, selection, covered, selected_values, overlap)


def sequential_geb(
    spatial: Sequence[np.ndarray],
    r_eta,
    D: int,
    K_g: int,
    E_s: float,
    M: int,
    alpha: float,
    epochs: int,
    pdp: Sequence[float] | None = None,
    train_symbols: int | None = None,
) -> list[Beamformer]:
    """Sequential GEB: one beamformer per block ``m = 0..epochs-1``.

    Each block picks the largest current ledger eigenvalues pooled over
    delays, assembles the beamformer from the matching generalized
    eigenvectors, and then shrinks every covered eigenvalue and relaxes the
    ledger toward its initial spectrum.
    """
    r_eta = np.asarray(r_eta, dtype=complex)
    pdp = [1.0 / len(spatial)] * len(spatial) if pdp is None else list(pdp)
    if len(pdp) != len(spatial):
        raise ValueError("pdp and spatial covariances differ in length")
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    pairs = delay_eigenpairs(spatial, pdp, r_eta)
    ledger = SnrLedger.from_eigenpairs(pairs)
    if D > ledger.size:
        raise ValueError(f"D={D} exceeds N L = {ledger.size}")
    designs = []
    for _ in range(epochs):
        bf = _assemble(pairs, _pooled_order(ledger.values), D, r_eta, ledger.values, "geb-seq")
        designs.append(bf)
        ledger = update_ledger(ledger, bf.covered, E_s, M, alpha, train_symbols)
    return designs


def fixed_geb(spatial, r_eta, D: int, pdp=None) -> Beamformer:
    """GEB designed once from the initial spectra."""
    bf = sequential_geb(spatial, r_eta, D, 1, 1.0, 1, 1.0, 1, pdp)[0]
    bf.kind = "geb-fixed"
    return bf


def dft_beamspace(spatial: Sequence[np.ndarray], pdp: Sequence[float], D: int) -> Beamformer:
    """Top-``D`` orthonormal eigenvectors of ``sum_l rho_l R_l``."""
    total = sum(rho * np.asarray(r, dtype=complex) for rho, r in zip(pdp, spatial))
    n = total.shape[0]
    if D < 0 or D > n:
        raise ValueError(f"D={D} must lie in 0..{n}")
    _, vectors = linalg.eigh(0.5 * (total + total.conj().T))
    return Beamformer(vectors[:, ::-1][:, :D].copy(), "dft")


def identity_beamformer(element_count: int) -> Beamformer:
    return Beamformer(np.eye(element_count, dtype=complex), "identity")


def beam_pattern(beamformer, geometry: ArrayGeometry, azimuths) -> np.ndarray:
    """Gain ``||S^H a(theta)||^2`` in dB over ``azimuths``."""
    S = beamformer.columns if isinstance(beamformer, Beamformer) else np.asarray(beamformer)
    gain = np.sum(np.abs(S.conj().T @ steering_matrix(geometry, azimuths)) ** 2, axis=0)
    with np.errstate(divide="ignore"):
        return np.maximum(10.0 * np.log10(gain), PATTERN_FLOOR_DB)


def captured_power(beamformer, spatial: Sequence[np.ndarray], pdp: Sequence[float]) -> float:
    """Fraction of the intended group's power inside the beamformer's span."""
    S = beamformer.columns if isinstance(beamformer, Beamformer) else np.asarray(beamformer)
    q, _ = np.linalg.qr(S)
    total = sum(rho * np.asarray(r) for rho, r in zip(pdp, spatial))
    return float(np.real(np.trace(q.conj().T @ total @ q)) / np.real(np.trace(total)))


def snr_matrices(blocks: Sequence[np.ndarray], S, r_eta) -> list[np.ndarray]:
    """``[S^H R_eta S]^-1 [S^H A^l S]`` for each covariance block ``A^l``."""
    S = np.asarray(S)
    w = S.conj().T @ r_eta @ S
    return [linalg.solve(w, S.conj().T @ a @ S, assume_a="her") for a in blocks]


def exact_det_metric(blocks, S, r_eta, K_g: int, E_s: float, M: int) -> float:
    """``log det(I + E_s M sum_l I_K (x) E_l (x) SNR^l)`` without the separable approximation."""
    total = 0.0
    for snr in snr_matrices(blocks, S, r_eta):
        sign, logdet = np.linalg.slogdet(np.eye(snr.shape[0]) + E_s * M * snr)
        total += logdet
    return K_g * float(total)
