"""Pilot sequences and the Kronecker-structured measurement map.

Pilots are BPSK-mapped sequences from the small Kasami set. A group's
training vector at epoch ``n`` stacks, per user, the conjugated symbols
``x_n, x_{n-1}, ..., x_{n-L+1}``; the measurement map is ``x (x) S`` for a
pre-beamformer ``S``. Products with the map are evaluated through reshapes
instead of forming the Kronecker product.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

# exponents of the feedback taps of x^6 + x + 1
DEFAULT_POLYNOMIALS = {6: (6, 1, 0), 4: (4, 1, 0), 8: (8, 4, 3, 2, 0), 10: (10, 3, 0)}


def m_sequence(degree: int, taps=None) -> np.ndarray:
    """Maximal-length binary sequence of period ``2**degree - 1``.

    ``taps`` lists the exponents of a primitive polynomial (highest first,
    constant term included). The register starts at ``0...01``.
    """
    taps = DEFAULT_POLYNOMIALS[degree] if taps is None else taps
    if taps[0] != degree or taps[-1] != 0:
        raise ValueError(f"polynomial exponents {taps} do not match degree {degree}")
    length = 2**degree - 1
    seq = np.zeros(length + degree, dtype=np.int8)
    seq[degree - 1] = 1
    low = list(taps[1:])
    # a[k + degree] = xor of a[k + t] over the lower-order exponents t
    for k in range(length):
        seq[k + degree] = np.bitwise_xor.reduce(seq[[k + t for t in low]])
    seq = seq[:length]
    if seq.sum() != 2 ** (degree - 1):
        raise ValueError(f"polynomial {taps} is not primitive")
    return seq


def kasami_small_set(degree: int = 6, taps=None) -> np.ndarray:
    """Small Kasami set as a ``(2**(degree/2), 2**degree - 1)`` bit array.

    Row 0 is the m-sequence ``u``; row ``1 + k`` is ``u`` xor the ``k``-th
    cyclic shift of its (nonzero) decimation by ``2**(degree/2) + 1``.
    """
    if degree % 2 or degree < 2:
        raise ValueError(f"Kasami small sets need an even degree, got {degree}")
    u = m_sequence(degree, taps)
    length = u.size
    q = 2 ** (degree // 2) + 1
    # some phases of u decimate to all zeros; take the first phase that does not
    for phase in range(length):
        w = u[(q * np.arange(length) + phase) % length]
        if w.any():
            break
    short_period = 2 ** (degree // 2) - 1
    rows = [u] + [np.bitwise_xor(u, np.roll(w, -k)) for k in range(short_period)]
    return np.array(rows, dtype=np.int8)


def periodic_cross_correlation(a_bits, b_bits) -> np.ndarray:
    """Periodic correlation of two bit sequences after mapping 0 -> +1, 1 -> -1."""
    a = 1 - 2 * np.asarray(a_bits, dtype=np.int64)
    b = 1 - 2 * np.asarray(b_bits, dtype=np.int64)
    return np.array([int(a @ np.roll(b, -s)) for s in range(a.size)])


@dataclass(frozen=True)
class PilotBook:
    """Training symbols of the ``K`` users of a group (``K x T``)."""

    sequences: np.ndarray
    symbol_energy: float
    precursors: np.ndarray | None = None

    def __post_init__(self):
        seq = np.asarray(self.sequences, dtype=complex)
        if seq.ndim != 2:
            raise ValueError("sequences must be a K x T array")
        object.__setattr__(self, "sequences", seq)
        if self.precursors is not None:
            pre = np.asarray(self.precursors, dtype=complex)
            if pre.ndim != 2 or pre.shape[0] != seq.shape[0]:
                raise ValueError("precursors must be a K x (L-1) array")
            object.__setattr__(self, "precursors", pre)

    @property
    def user_count(self) -> int:
        return self.sequences.shape[0]

    @property
    def length(self) -> int:
        return self.sequences.shape[1]

    def symbol(self, user: int, n: int) -> complex:
        """Symbol of ``user`` at time ``n``; negative times index the precursors."""
        if n >= 0:
            return self.sequences[user, n]
        if self.precursors is None or -n > self.precursors.shape[1]:
            return 0.0
        # precursors are stored oldest first, so x_{-1} is the last column
        return self.precursors[user, n]

    def save(self, path) -> None:
        """One row of +-1 chips per user."""
        chips = np.rint(self.sequences.real / np.sqrt(self.symbol_energy)).astype(int)
        np.savetxt(Path(path), chips, fmt="%d")


def build_pilot_book(length: int, user_count: int, symbol_energy: float = 1.0, degree: int = 6) -> PilotBook:
    """Last ``user_count`` sequences of the small Kasami set, cut to ``length`` chips."""
    kasami = kasami_small_set(degree)
    if length < 1 or length > kasami.shape[1]:
        raise ValueError(f"training length {length} must be in 1..{kasami.shape[1]}")
    if user_count < 1 or user_count > kasami.shape[0]:
        raise ValueError(f"user count {user_count} must be in 1..{kasami.shape[0]}")
    bits = kasami[-user_count:, :length]
    return PilotBook(np.sqrt(symbol_energy) * (1.0 - 2.0 * bits), symbol_energy)


def training_vector(book: PilotBook, n: int, memory: int) -> np.ndarray:
    """Group training vector at epoch ``n`` (length ``K * L``, users outermost)."""
    if not 0 <= n < book.length:
        raise ValueError(f"epoch {n} outside the training length {book.length}")
    x = np.empty(book.user_count * memory, dtype=complex)
    for k in range(book.user_count):
        for l in range(memory):
            x[k * memory + l] = np.conj(book.symbol(k, n - l))
    return x


class Measurement:
    """The map ``Psi = x (x) S`` of shape ``(K L N) x D``.

    ``S`` defaults to the ``N x N`` identity, which gives the full-array
    map ``x (x) I_N``.
    """

    def __init__(self, x, beamformer=None, element_count: int | None = None):
        self.x = np.asarray(x, dtype=complex).ravel()
        if beamformer is None:
            if element_count is None:
                raise ValueError("element_count is required when no beamformer is given")
            beamformer = np.eye(element_count, dtype=complex)
        self.S = np.asarray(beamformer, dtype=complex)
        if self.S.ndim != 2:
            raise ValueError("beamformer must be an N x D matrix")
        self.N, self.D = self.S.shape
        self.KL = self.x.size

    @property
    def shape(self) -> tuple[int, int]:
        return self.KL * self.N, self.D

    def spatial(self, h) -> np.ndarray:
        """``(x (x) I_N)^H h``: the noiseless array snapshot (length ``N``)."""
        h = np.asarray(h)
        if h.shape[-1] != self.KL * self.N:
            raise ValueError(f"channel length {h.shape[-1]} does not match {self.KL * self.N}")
        return np.einsum("a,...an->...n", self.x.conj(), h.reshape(h.shape[:-1] + (self.KL, self.N)))

    def adjoint(self, h) -> np.ndarray:
        """``Psi^H h`` (length ``D``)."""
        return self.spatial(h) @ self.S.conj()

    def apply(self, v) -> np.ndarray:
        """``Psi v`` (length ``K L N``)."""
        v = np.asarray(v)
        if v.shape[-1] != self.D:
            raise ValueError(f"vector length {v.shape[-1]} does not match beamspace dimension {self.D}")
        return np.kron(self.x, self.S @ v)

    def right_product(self, P) -> np.ndarray:
        """``P Psi`` for a ``(K L N)``-square matrix ``P``."""
        P = np.asarray(P)
        px = np.einsum("iam,a->im", P.reshape(P.shape[0], self.KL, self.N), self.x)
        return px @ self.S

    def quadratic(self, P) -> np.ndarray:
        """``Psi^H P Psi`` (``D x D``)."""
        P = np.asarray(P)
        kln = self.KL * self.N
        if P.shape != (kln, kln):
            raise ValueError(f"matrix shape {P.shape} does not match {(kln, kln)}")
        p4 = P.reshape(self.KL, self.N, self.KL, self.N)
        q = np.einsum("a,anbm,b->nm", self.x.conj(), p4, self.x, optimize=True)
        return self.S.conj().T @ q @ self.S

    def dense(self) -> np.ndarray:
        return np.kron(self.x[:, None], self.S)


def measurement_matrix(x, beamformer) -> Measurement:
    """Structured ``x (x) S``; call ``.dense()`` to materialize small cases."""
    x = np.asarray(x)
    S = np.asarray(beamformer)
    if S.ndim != 2:
        raise ValueError("beamformer must be a matrix")
    return Measurement(x, S)
