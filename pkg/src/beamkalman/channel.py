"""Gauss-Markov channel evolution and received pilot snapshots.

The group channel follows ``h_n = alpha h_{n-1} + sqrt(1 - alpha^2) b_n``
with ``b_n ~ CN(0, R_h)``, which keeps the marginal covariance at ``R_h``.
Channel vectors may carry leading batch dimensions so that many independent
trajectories can be simulated at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .covariance import ExtendedChannelCovariance, GroupProfile, extended_covariance
from .training import Measurement

QPSK = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))


def covariance_factor(R) -> np.ndarray:
    """Square factor ``C`` with ``C C^H = R`` for a Hermitian PSD ``R``.

    Uses the eigendecomposition. Eigenvalues below roundoff level
    (``N eps`` times the largest) are set to zero, so singular covariances
    are fine and their factors stay inside the range of ``R``.
    """
    if isinstance(R, ExtendedChannelCovariance):
        R = R.materialize()
    R = np.asarray(R, dtype=complex)
    w, v = linalg.eigh(0.5 * (R + R.conj().T))
    floor = w.size * np.finfo(float).eps * max(float(w.max(initial=0.0)), 0.0)
    w = np.where(w > floor, w, 0.0)
    return v * np.sqrt(w)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circular complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class ArModel:
    alpha: float
    root_covariance: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def from_covariance(cls, covariance, alpha: float) -> "ArModel":
        return cls(alpha, covariance_factor(covariance))

    @property
    def dim(self) -> int:
        return self.root_covariance.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return self.root_covariance @ self.root_covariance.conj().T

    def draw(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = (() if size is None else tuple(np.atleast_1d(size))) + (self.root_covariance.shape[1],)
        return complex_normal(rng, shape) @ self.root_covariance.T


@dataclass(frozen=True)
class ChannelState:
    h: np.ndarray
    epoch: int = 0


def sample_initial(model: ArModel, rng: np.random.Generator, size=None) -> ChannelState:
    """Draw ``h_0`` from the stationary distribution ``CN(0, R_h)``."""
    return ChannelState(model.draw(rng, size), 0)


def evolve(state: ChannelState, model: ArModel, rng: np.random.Generator) -> ChannelState:
    """One AR(1) step."""
    if state.h.shape[-1] != model.dim:
        raise ValueError(f"state length {state.h.shape[-1]} does not match model dimension {model.dim}")
    size = state.h.shape[:-1] or None
    innovation = model.draw(rng, size)
    h = model.alpha * state.h + np.sqrt(1.0 - model.alpha**2) * innovation
    return ChannelState(h, state.epoch + 1)


class GaussianInterference:
    """Inter-group interference drawn directly from ``CN(0, R_eta)``."""

    def __init__(self, covariance):
        covariance = np.asarray(covariance, dtype=complex)
        # raises LinAlgError unless the covariance is positive definite
        self.factor = linalg.cholesky(covariance, lower=True)
        self.covariance = covariance

    @property
    def element_count(self) -> int:
        return self.factor.shape[0]

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = (() if size is None else tuple(np.atleast_1d(size))) + (self.element_count,)
        return complex_normal(rng, shape) @ self.factor.T


class ExplicitInterference:
    """Interference synthesized from the interfering groups themselves.

    Every interferer has its own Gauss-Markov multipath channel and sends
    i.i.d. symbols drawn from ``constellation`` (unit average energy) scaled
    to ``symbol_energy * relative_power``. White noise of power
    ``noise_power`` is added. Arrivals are taken symbol-aligned with the
    serving group.
    """

    def __init__(
        self,
        interferers: Sequence[GroupProfile],
        spatial: Sequence[Sequence[np.ndarray]],
        symbol_energy: float,
        noise_power: float,
        rng: np.random.Generator,
        alpha: float = 0.0,
        constellation=QPSK,
    ):
        if len(interferers) != len(spatial):
            raise ValueError("one list of spatial covariances is needed per interferer")
        if noise_power < 0:
            raise ValueError("noise_power must be nonnegative")
        self.profiles = list(interferers)
        self.models = [
            ArModel.from_covariance(extended_covariance(p, covs), alpha) for p, covs in zip(interferers, spatial)
        ]
        self.element_count = np.asarray(spatial[0][0]).shape[0] if spatial else 0
        self.symbol_energy = symbol_energy
        self.noise_power = noise_power
        self.constellation = np.asarray(constellation, dtype=complex)
        self.channels = [sample_initial(m, rng) for m in self.models]
        self.history = [self._symbols(p, rng, p.memory) for p in self.profiles]
        self._fresh = True

    def _symbols(self, profile: GroupProfile, rng, count: int) -> np.ndarray:
        picks = self.constellation[rng.integers(self.constellation.size, size=(profile.user_count, count))]
        return np.sqrt(self.symbol_energy * profile.relative_power) * picks

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        if size is not None:
            return np.stack([self.sample(rng) for _ in range(int(np.prod(size)))]).reshape(
                tuple(np.atleast_1d(size)) + (self.element_count,)
            )
        if not self._fresh:
            self.channels = [evolve(c, m, rng) for c, m in zip(self.channels, self.models)]
            for i, p in enumerate(self.profiles):
                # column l holds x_{n-l}
                self.history[i] = np.concatenate([self._symbols(p, rng, 1), self.history[i][:, :-1]], axis=1)
        self._fresh = False
        eta = np.sqrt(self.noise_power) * complex_normal(rng, (self.element_count,))
        for c, p, x in zip(self.channels, self.profiles, self.history):
            taps = c.h.reshape(p.user_count * p.memory, self.element_count)
            eta = eta + x.ravel() @ taps
        return eta


def sample_interference(source, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw interference-plus-noise from ``source``.

    ``source`` is a :class:`GaussianInterference`, an
    :class:`ExplicitInterference`, or a bare covariance matrix (treated as
    Gaussian-equivalent).
    """
    if not hasattr(source, "sample"):
        source = GaussianInterference(source)
    return source.sample(rng, size)


def observe_full(state: ChannelState, pilots, interference, rng: np.random.Generator) -> np.ndarray:
    """Full-array snapshot ``(x (x) I_N)^H h + eta``.

    ``interference`` may be ``None`` for a noiseless snapshot.
    """
    pilots = np.asarray(pilots).ravel()
    dim = state.h.shape[-1]
    if pilots.size == 0 or dim % pilots.size:
        raise ValueError(f"training vector of length {pilots.size} does not divide channel length {dim}")
    y = Measurement(pilots, element_count=dim // pilots.size).spatial(state.h)
    if interference is not None:
        y = y + sample_interference(interference, rng, state.h.shape[:-1] or None)
    return y
