"""Experiment configuration, presets and YAML loading."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..covariance import AngularSector, ArrayGeometry, GroupProfile

BEAMFORMER_KINDS = ("geb-seq", "geb-fixed", "dft", "identity")
SCHEDULES = ("continuous", "block")
INTERFERENCE_MODES = ("gaussian", "explicit")

SERVING_SECTORS = ((-1.0, 1.0), (-1.0, 1.0), (5.0, 7.0))
INTERFERER_SECTORS = (
    (-29.0, -26.0),
    (-21.0, -19.0),
    (-12.0, -9.0),
    (-5.5, -3.5),
    (9.5, 12.5),
    (15.0, 17.0),
    (24.0, 27.0),
)


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: ArrayGeometry
    serving: GroupProfile
    interferers: tuple[GroupProfile, ...]
    snr_db: float = 30.0
    noise_power: float = 1.0
    alpha: float = 0.9999
    M: int = 5
    T: int = 50
    dims: tuple[int, ...] = (2, 4, 6, 8, 12)
    beamformers: tuple[str, ...] = ("geb-seq", "geb-fixed", "dft")
    trials: int = 20
    seed: int = 0
    schedule: str = "continuous"
    train_per_block: int | None = None
    quadrature_points: int = 360
    interference_mode: str = "gaussian"
    interferer_alpha: float = 0.9999
    pattern_dim: int = 6
    pattern_step: float = 0.1
    workers: int = 1
    label: str = field(default="custom", compare=False)

    @property
    def symbol_energy(self) -> float:
        """``E_s`` from ``snr = E_s / N_0``."""
        return self.noise_power * 10.0 ** (self.snr_db / 10.0)

    @property
    def training_symbols_per_block(self) -> int:
        if self.schedule == "continuous":
            return self.M
        return self.train_per_block

    def validate(self) -> None:
        n = self.geometry.element_count
        errors = []
        if not math.isfinite(self.snr_db):
            errors.append("snr_db must be finite")
        if not self.noise_power > 0:
            errors.append("noise_power must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            errors.append("alpha must lie in [0, 1]")
        if self.trials < 1:
            errors.append("trials must be at least 1")
        if self.M < 1:
            errors.append("M must be at least 1")
        if not 1 <= self.T <= 63:
            errors.append("T must lie in 1..63 (length-63 Kasami pilots)")
        if self.schedule not in SCHEDULES:
            errors.append(f"schedule must be one of {SCHEDULES}")
        if self.schedule == "block" and not (self.train_per_block and 1 <= self.train_per_block <= self.M):
            errors.append("block schedule needs 1 <= train_per_block <= M")
        if self.interference_mode not in INTERFERENCE_MODES:
            errors.append(f"interference_mode must be one of {INTERFERENCE_MODES}")
        for kind in self.beamformers:
            if kind not in BEAMFORMER_KINDS:
                errors.append(f"unknown beamformer {kind!r}; choose from {BEAMFORMER_KINDS}")
        for d in self.dims:
            if d < 1:
                errors.append(f"dimension {d} must be positive")
            elif d > n:
                # a beamformer on N antennas has at most N independent columns
                errors.append(f"dimension {d} exceeds N = {n}")
        if self.serving.user_count > 8:
            errors.append("at most 8 users per group (small Kasami set of degree 6)")
        if self.workers < 1:
            errors.append("workers must be at least 1")
        if errors:
            raise ValueError("invalid experiment configuration: " + "; ".join(errors))


def _profile(group_id: int, users: int, sectors, pdp=(), relative_power: float = 1.0) -> GroupProfile:
    return GroupProfile(
        group_id=group_id,
        user_count=users,
        sectors=tuple(AngularSector(float(lo), float(hi)) for lo, hi in sectors),
        pdp=tuple(pdp),
        relative_power=relative_power,
    )


def build_paper_scenario() -> ExperimentConfig:
    """N = 100 ULA, intended group of 2 users and 7 interfering groups of 3."""
    serving = _profile(0, 2, SERVING_SECTORS)
    interferers = tuple(_profile(g + 1, 3, (s, s, s)) for g, s in enumerate(INTERFERER_SECTORS))
    return ExperimentConfig(ArrayGeometry(100, 0.5), serving, interferers, label="paper")


def build_desk_scenario() -> ExperimentConfig:
    """The full-scale scenario on a 32-element array; sectors unchanged."""
    return replace(build_paper_scenario(), geometry=ArrayGeometry(32, 0.5), label="desk")


PRESETS = {"paper": build_paper_scenario, "desk": build_desk_scenario}


def _parse_group(entry: dict, group_id: int) -> GroupProfile:
    sectors = entry["sectors"]
    if "memory" in entry and len(sectors) == 1:
        sectors = sectors * int(entry["memory"])
    return _profile(
        int(entry.get("id", group_id)),
        int(entry["users"]),
        sectors,
        entry.get("pdp", ()),
        float(entry.get("relative_power", 1.0)),
    )


def config_from_mapping(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay a parsed YAML mapping on ``base`` (or on its ``preset``)."""
    data = dict(data or {})
    preset = data.pop("preset", None)
    if base is None:
        base = PRESETS[preset or "desk"]()
    elif preset is not None:
        base = PRESETS[preset]()
    updates = {}
    if "array" in data:
        arr = data.pop("array")
        updates["geometry"] = ArrayGeometry(
            int(arr.get("elements", base.geometry.element_count)),
            float(arr.get("spacing", base.geometry.element_spacing)),
        )
    if "serving" in data:
        updates["serving"] = _parse_group(data.pop("serving"), 0)
    if "interferers" in data:
        updates["interferers"] = tuple(_parse_group(e, g + 1) for g, e in enumerate(data.pop("interferers")))
    known = {f.name for f in fields(ExperimentConfig)}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"unknown configuration key {key!r}")
        if key in ("dims", "beamformers"):
            value = tuple(value)
        updates[key] = value
    return replace(base, **updates)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    path = Path(path)
    with path.open() as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, dict):
        raise ValueError(f"{path}: configuration must be a mapping")
    return config_from_mapping(data or {}, base)
