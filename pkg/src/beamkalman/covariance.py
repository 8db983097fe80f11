"""Second-order channel statistics for a uniform linear array.

Per-delay spatial covariances are built from angular sectors with the
one-ring model (uniform angular density, midpoint quadrature), normalized to
unit trace. The inter-group interference covariance and the block-diagonal
covariance of the stacked group channel are assembled from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_QUADRATURE_POINTS = 360


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array with ``element_count`` elements spaced
    ``element_spacing`` wavelengths apart."""

    element_count: int
    element_spacing: float = 0.5

    def __post_init__(self):
        if int(self.element_count) != self.element_count or self.element_count < 1:
            raise ValueError(f"element_count must be a positive integer, got {self.element_count}")
        if not self.element_spacing > 0:
            raise ValueError(f"element_spacing must be positive, got {self.element_spacing}")


@dataclass(frozen=True)
class AngularSector:
    """Azimuth support ``[lower, upper]`` in degrees."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (-90.0 < self.lower < 90.0 and -90.0 < self.upper < 90.0):
            raise ValueError(f"sector [{self.lower}, {self.upper}] must lie inside (-90, 90) degrees")
        if self.lower > self.upper:
            raise ValueError(f"sector lower bound {self.lower} exceeds upper bound {self.upper}")

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class GroupProfile:
    """Geometry and statistics of one user group.

    ``sectors[l]`` and ``pdp[l]`` describe the ``l``-th resolvable delay. When
    ``pdp`` is omitted the power-delay profile is uniform.
    """

    group_id: int
    user_count: int
    sectors: tuple[AngularSector, ...]
    pdp: tuple[float, ...] = field(default=())
    relative_power: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sectors", tuple(self.sectors))
        if not self.sectors:
            raise ValueError("a group needs at least one delay tap")
        if not self.pdp:
            object.__setattr__(self, "pdp", (1.0 / len(self.sectors),) * len(self.sectors))
        object.__setattr__(self, "pdp", tuple(float(p) for p in self.pdp))
        if len(self.pdp) != len(self.sectors):
            raise ValueError(f"pdp has {len(self.pdp)} taps but {len(self.sectors)} sectors were given")
        if any(p < 0 for p in self.pdp):
            raise ValueError("power-delay profile entries must be nonnegative")
        if abs(sum(self.pdp) - 1.0) > 1e-12:
            raise ValueError(f"power-delay profile must sum to one, sums to {sum(self.pdp)}")
        if int(self.user_count) != self.user_count or self.user_count < 1:
            raise ValueError(f"user_count must be a positive integer, got {self.user_count}")
        if self.relative_power < 0:
            raise ValueError("relative_power must be nonnegative")

    @property
    def memory(self) -> int:
        return len(self.sectors)


def steering_vector(geometry: ArrayGeometry, azimuth: float) -> np.ndarray:
    """Array response ``exp(i 2 pi d n sin(theta))`` for ``n = 0..N-1``."""
    if not -90.0 < azimuth < 90.0:
        raise ValueError(f"azimuth {azimuth} outside (-90, 90) degrees")
    n = np.arange(geometry.element_count)
    phase = 2.0 * np.pi * geometry.element_spacing * np.sin(np.deg2rad(azimuth))
    return np.exp(1j * phase * n)


def steering_matrix(geometry: ArrayGeometry, azimuths) -> np.ndarray:
    """Steering vectors for several azimuths, stacked as columns (N x Q)."""
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    if np.any(np.abs(azimuths) >= 90.0):
        raise ValueError("azimuths must lie inside (-90, 90) degrees")
    n = np.arange(geometry.element_count)[:, None]
    phase = 2.0 * np.pi * geometry.element_spacing * np.sin(np.deg2rad(azimuths))[None, :]
    return np.exp(1j * phase * n)


def sector_covariance(
    geometry: ArrayGeometry,
    sector: AngularSector,
    quadrature_points: int = DEFAULT_QUADRATURE_POINTS,
) -> np.ndarray:
    """Unit-trace spatial covariance of a uniformly illuminated angular sector.

    The sector integral of ``a(theta) a(theta)^H`` is discretized with the
    midpoint rule. A zero-width sector gives the rank-one matrix
    ``a a^H / N``.
    """
    if quadrature_points < 1:
        raise ValueError("quadrature_points must be at least 1")
    width = sector.upper - sector.lower
    angles = sector.lower + (np.arange(quadrature_points) + 0.5) * width / quadrature_points
    a = steering_matrix(geometry, angles)
    r = a @ a.conj().T / quadrature_points
    r = 0.5 * (r + r.conj().T)
    return r / np.trace(r).real


def group_covariances(
    geometry: ArrayGeometry,
    profile: GroupProfile,
    quadrature_points: int = DEFAULT_QUADRATURE_POINTS,
) -> list[np.ndarray]:
    """Spatial covariance ``R_l`` for every delay of a group."""
    return [sector_covariance(geometry, s, quadrature_points) for s in profile.sectors]


def interference_covariance(
    geometry: ArrayGeometry,
    serving_group: GroupProfile,
    interferers: Sequence[GroupProfile],
    symbol_energy: float,
    noise_power: float,
    quadrature_points: int = DEFAULT_QUADRATURE_POINTS,
    spatial: Sequence[Sequence[np.ndarray]] | None = None,
) -> np.ndarray:
    """Covariance of inter-group interference plus white noise.

    ``E_s * sum_g' gamma_g' K_g' sum_l rho_l R_l^(g') + N_0 I``. Spatial
    covariances of the interferers are built from their sectors unless given
    in ``spatial`` (one list per interferer).
    """
    if not noise_power > 0:
        raise ValueError(f"noise_power must be positive, got {noise_power}")
    if any(p.group_id == serving_group.group_id for p in interferers):
        raise ValueError("the serving group cannot appear among its interferers")
    n = geometry.element_count
    r_eta = noise_power * np.eye(n, dtype=complex)
    for idx, profile in enumerate(interferers):
        covs = spatial[idx] if spatial is not None else group_covariances(geometry, profile, quadrature_points)
        weight = symbol_energy * profile.relative_power * profile.user_count
        for rho, r in zip(profile.pdp, covs):
            r_eta += weight * rho * r
    return 0.5 * (r_eta + r_eta.conj().T)


def elementary_diagonal(size: int, index: int) -> np.ndarray:
    """``size x size`` matrix whose only nonzero entry is a one at ``(index, index)``."""
    e = np.zeros((size, size))
    e[index, index] = 1.0
    return e


@dataclass
class ExtendedChannelCovariance:
    """``sum_l I_K (x) E_{L,l} (x) A^l`` stored through its ``L`` spatial blocks."""

    blocks: list[np.ndarray]
    user_count: int

    @property
    def memory(self) -> int:
        return len(self.blocks)

    @property
    def element_count(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def dim(self) -> int:
        return self.user_count * self.memory * self.element_count

    def trace(self) -> float:
        return self.user_count * sum(np.trace(a).real for a in self.blocks)

    def materialize(self) -> np.ndarray:
        n, kl = self.element_count, self.user_count * self.memory
        full = np.zeros((kl * n, kl * n), dtype=complex)
        for k in range(self.user_count):
            for l, a in enumerate(self.blocks):
                i = (k * self.memory + l) * n
                full[i:i + n, i:i + n] = a
        return full


def extended_covariance(profile: GroupProfile, spatial: Sequence[np.ndarray]) -> ExtendedChannelCovariance:
    """Covariance of the stacked group channel (users outermost, delays inside)."""
    if len(spatial) != profile.memory:
        raise ValueError(f"expected {profile.memory} spatial covariances, got {len(spatial)}")
    blocks = [rho * np.asarray(r, dtype=complex) for rho, r in zip(profile.pdp, spatial)]
    return ExtendedChannelCovariance(blocks=blocks, user_count=profile.user_count)
