"""Monte Carlo runs of the reduced-rank Kalman estimator.

The error covariance recursion depends only on the pilots and beamformers,
not on the received data. It is therefore run once per (beamformer kind,
dimension) into a :class:`FilterPlan` whose gains are then replayed on every
trial's simulated channel and interference.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import kalman as kf
from ..beamspace import (
    Beamformer,
    captured_power,
    dft_beamspace,
    fixed_geb,
    identity_beamformer,
    sequential_geb,
)
from ..channel import ArModel, ExplicitInterference, GaussianInterference, evolve, observe_full, sample_initial
from ..covariance import extended_covariance, group_covariances, interference_covariance
from ..training import Measurement, PilotBook, build_pilot_book, training_vector
from .config import ExperimentConfig


@dataclass(frozen=True)
class ResultRow:
    epoch: int
    dimension: int
    beamformer: str
    trial: int
    mse: float
    sq_error: float
    log_volume: float
    captured_power: float

    def key(self):
        return (self.beamformer, self.dimension, self.trial, self.epoch)


@dataclass
class ScenarioStats:
    """Second-order statistics and pilots shared by all runs of a config."""

    spatial: list[np.ndarray]
    interferer_spatial: list[list[np.ndarray]]
    r_eta: np.ndarray
    r_h: object
    r_h_dense: np.ndarray
    book: PilotBook
    volume_basis: np.ndarray


def scenario_statistics(config: ExperimentConfig) -> ScenarioStats:
    geo = config.geometry
    spatial = group_covariances(geo, config.serving, config.quadrature_points)
    interferer_spatial = [group_covariances(geo, p, config.quadrature_points) for p in config.interferers]
    r_eta = interference_covariance(
        geo,
        config.serving,
        config.interferers,
        config.symbol_energy,
        config.noise_power,
        spatial=interferer_spatial,
    )
    r_h = extended_covariance(config.serving, spatial)
    r_h_dense = r_h.materialize()
    book = build_pilot_book(config.T, config.serving.user_count, config.symbol_energy)
    return ScenarioStats(spatial, interferer_spatial, r_eta, r_h, r_h_dense, book, kf.significant_basis(r_h_dense))


def schedule(config: ExperimentConfig) -> list[int | None]:
    """Pilot index used at each epoch, or ``None`` for a prediction-only epoch."""
    if config.schedule == "continuous":
        return list(range(config.T))
    plan, used = [], 0
    while used < config.T:
        for u in range(config.M):
            if u < config.train_per_block and used < config.T:
                plan.append(used)
                used += 1
            else:
                plan.append(None)
    return plan


def design(config: ExperimentConfig, stats: ScenarioStats, kind: str, D: int, blocks: int) -> list[Beamformer]:
    """Beamformer for every block (a one-element list for static designs)."""
    pdp = config.serving.pdp
    if kind == "geb-seq":
        return sequential_geb(
            stats.spatial,
            stats.r_eta,
            D,
            config.serving.user_count,
            config.symbol_energy,
            config.M,
            config.alpha,
            blocks,
            pdp=pdp,
            train_symbols=config.training_symbols_per_block,
        )
    if kind == "geb-fixed":
        return [fixed_geb(stats.spatial, stats.r_eta, D, pdp)]
    if kind == "dft":
        return [dft_beamspace(stats.spatial, pdp, D)]
    if kind == "identity":
        return [identity_beamformer(config.geometry.element_count)]
    raise ValueError(f"unknown beamformer kind {kind!r}")


@dataclass
class FilterPlan:
    kind: str
    dimension: int
    epochs: list[int | None]
    beamformers: list[Beamformer]
    gains: list[np.ndarray | None]
    mse: np.ndarray
    log_volume: np.ndarray
    captured: np.ndarray

    def beamformer_at(self, n: int, M: int) -> Beamformer:
        return self.beamformers[min(n // M, len(self.beamformers) - 1)]


def covariance_pass(config: ExperimentConfig, stats: ScenarioStats, kind: str, D: int) -> FilterPlan:
    epochs = schedule(config)
    blocks = -(-len(epochs) // config.M)
    beams = design(config, stats, kind, D, blocks)
    memory = config.serving.memory
    state = kf.init(stats.r_h)
    gains, mse, vol, cap = [], [], [], []
    for n, t in enumerate(epochs):
        bf = beams[min(n // config.M, len(beams) - 1)]
        if t is not None:
            psi = Measurement(training_vector(stats.book, t, memory), bf.columns)
            state, record = kf.measurement_update(state, np.zeros(bf.dimension), psi, stats.r_eta)
            gains.append(record.gain)
        else:
            gains.append(None)
        mse.append(kf.mse(state))
        vol.append(kf.log_volume(state.covariance, stats.volume_basis))
        cap.append(captured_power(bf, stats.spatial, config.serving.pdp))
        state = kf.predict(state, config.alpha, stats.r_h_dense)
    dim = beams[0].dimension
    return FilterPlan(kind, dim, epochs, beams, gains, np.array(mse), np.array(vol), np.array(cap))


def _interference(config: ExperimentConfig, stats: ScenarioStats, rng):
    if config.interference_mode == "explicit":
        return ExplicitInterference(
            config.interferers,
            stats.interferer_spatial,
            config.symbol_energy,
            config.noise_power,
            rng,
            alpha=config.interferer_alpha,
        )
    return GaussianInterference(stats.r_eta)


def run_trial(config: ExperimentConfig, stats: ScenarioStats, plans: list[FilterPlan], trial: int) -> list[ResultRow]:
    """Replay every plan on one trial's channel and interference draws.

    All plans see the same channel and interference realization (common
    random numbers), drawn from the stream seeded with ``seed + trial``.
    """
    rng = np.random.default_rng(config.seed + trial)
    model = ArModel.from_covariance(stats.r_h_dense, config.alpha)
    interference = _interference(config, stats, rng)
    memory = config.serving.memory
    channel = sample_initial(model, rng)
    epochs = schedule(config)
    snapshots, channels = [], []
    for n, t in enumerate(epochs):
        channels.append(channel.h)
        if t is not None:
            snapshots.append(observe_full(channel, training_vector(stats.book, t, memory), interference, rng))
        else:
            snapshots.append(None)
        channel = evolve(channel, model, rng)

    rows = []
    for plan in plans:
        estimate = np.zeros(model.dim, dtype=complex)
        for n, t in enumerate(epochs):
            if t is not None:
                bf = plan.beamformer_at(n, config.M)
                psi = Measurement(training_vector(stats.book, t, memory), bf.columns)
                y = bf.columns.conj().T @ snapshots[n]
                estimate = estimate + plan.gains[n] @ (y - psi.adjoint(estimate))
            err = float(np.sum(np.abs(channels[n] - estimate) ** 2)) / config.serving.user_count
            rows.append(
                ResultRow(
                    n,
                    plan.dimension,
                    plan.kind,
                    trial,
                    float(plan.mse[n]),
                    err,
                    float(plan.log_volume[n]),
                    float(plan.captured[n]),
                )
            )
            estimate = config.alpha * estimate
    return rows


def build_plans(config: ExperimentConfig, stats: ScenarioStats) -> list[FilterPlan]:
    plans = []
    for kind in config.beamformers:
        dims = (config.geometry.element_count,) if kind == "identity" else config.dims
        for D in dims:
            plans.append(covariance_pass(config, stats, kind, D))
    return plans


def _trial_job(args):
    return run_trial(*args)


def run_experiment(config: ExperimentConfig, stats: ScenarioStats | None = None, plans=None):
    """All rows of an experiment, sorted by (beamformer, dimension, trial, epoch).

    Returns ``(rows, plans)``; the plans carry the beamformer designs.
    """
    config.validate()
    stats = scenario_statistics(config) if stats is None else stats
    plans = build_plans(config, stats) if plans is None else plans
    jobs = [(config, stats, plans, trial) for trial in range(config.trials)]
    if config.workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_trial_job, jobs))
    else:
        chunks = [_trial_job(job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=ResultRow.key)
    return rows, plans


def final_rows(rows: list[ResultRow]) -> list[ResultRow]:
    last = max(r.epoch for r in rows)
    return [r for r in rows if r.epoch == last]


def summarize(rows: list[ResultRow], field: str = "mse") -> dict[tuple[str, int, int], tuple[float, float, int]]:
    """Mean, standard error and count of ``field`` per (beamformer, dimension, epoch)."""
    groups: dict[tuple[str, int, int], list[float]] = {}
    for r in rows:
        groups.setdefault((r.beamformer, r.dimension, r.epoch), []).append(getattr(r, field))
    out = {}
    for key, vals in groups.items():
        v = np.asarray(vals)
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
        out[key] = (float(v.mean()), se, int(v.size))
    return out
