"""Monte Carlo system identification for the filter family.

Trials simulate d_t = w_{o,t}^T x_t + n_t and adapt a filter against
it, recording squared weight deviation (MSD) and squared a-priori
error (EMSE) before each update.  Every trial owns six independent
random substreams keyed by (seed, trial_index), so a trial's draws
never depend on how many trials run, in what order, or on how they
are scheduled across workers.  Ensemble curves are averaged in the
linear domain and reported in dB.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter

from . import filters, theory
from .filters import AlgorithmSpec, DegenerateRegressorError

GAUSSIAN = "gaussian"
IMPULSIVE = "impulsive"
NOISE_KINDS = (GAUSSIAN, IMPULSIVE)

WHITE = "white"
AR1 = "ar1"
REGRESSOR_KINDS = (WHITE, AR1)

#: sentinel selecting a per-trial random unit vector as the true system
RANDOM_UNIT = "random-unit"

#: a trial whose squared deviation passes this is dropped from the average
DIVERGENCE_MSD = 1e9

# fixed substream layout of one trial; see trial_streams
_SYSTEM, _REGRESSOR, _BACKGROUND, _GATE, _IMPULSE, _TRACKING = range(6)
_STREAMS_PER_TRIAL = 6


@dataclass(frozen=True)
class NoiseModel:
    """Additive measurement noise: Gaussian background, optionally hit
    by Bernoulli-gated Gaussian impulses.

    sigma_no_sq is the background variance (the full noise variance for
    the gaussian kind), sigma_ni_sq the impulse variance and nu_i the
    impulse probability per sample.
    """

    kind: str
    sigma_no_sq: float
    sigma_ni_sq: float = 0.0
    nu_i: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not (np.isfinite(self.sigma_no_sq) and self.sigma_no_sq >= 0.0):
            raise ValueError(f"sigma_no_sq must be finite and >= 0, got {self.sigma_no_sq!r}")
        if not (np.isfinite(self.sigma_ni_sq) and self.sigma_ni_sq >= 0.0):
            raise ValueError(f"sigma_ni_sq must be finite and >= 0, got {self.sigma_ni_sq!r}")
        if not (np.isfinite(self.nu_i) and 0.0 <= self.nu_i < 1.0):
            raise ValueError(f"nu_i must lie in [0, 1), got {self.nu_i!r}")

    @property
    def variance(self) -> float:
        """Variance of the draws; the impulse term enters scaled by its rate."""
        if self.kind == GAUSSIAN:
            return self.sigma_no_sq
        return self.sigma_no_sq + self.nu_i * self.sigma_ni_sq


@dataclass(frozen=True)
class RegressorModel:
    """Regressor statistics: i.i.d. Gaussian entries, or a stationary
    AR(1) tap line with autocorrelation sigma_x_sq * rho^|i-j|."""

    kind: str
    sigma_x_sq: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in REGRESSOR_KINDS:
            raise ValueError(f"unknown regressor kind {self.kind!r}; expected one of {REGRESSOR_KINDS}")
        if not (np.isfinite(self.sigma_x_sq) and self.sigma_x_sq > 0.0):
            raise ValueError(f"sigma_x_sq must be finite and > 0, got {self.sigma_x_sq!r}")
        if not (np.isfinite(self.rho) and -1.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one reproducible ensemble experiment."""

    algorithm: AlgorithmSpec
    mu: float
    filter_order: int
    regressor: RegressorModel
    noise: NoiseModel
    true_system: object = RANDOM_UNIT
    tracking_q_var: float = 0.0
    n_iterations: int = 1000
    n_trials: int = 1
    seed: int = 0
    initial_weights: object = None

    def __post_init__(self):
        if not isinstance(self.algorithm, AlgorithmSpec):
            raise ValueError("algorithm must be an AlgorithmSpec")
        if not (np.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"mu must be finite and > 0, got {self.mu!r}")
        p = self.filter_order
        if not (isinstance(p, (int, np.integer)) and p >= 1):
            raise ValueError(f"filter_order must be an integer >= 1, got {p!r}")
        if not isinstance(self.regressor, RegressorModel):
            raise ValueError("regressor must be a RegressorModel")
        if not isinstance(self.noise, NoiseModel):
            raise ValueError("noise must be a NoiseModel")
        if isinstance(self.true_system, str):
            if self.true_system != RANDOM_UNIT:
                raise ValueError(f"true_system must be a vector or {RANDOM_UNIT!r}")
        else:
            w_o = np.asarray(self.true_system, dtype=float)
            if w_o.shape != (p,) or not np.all(np.isfinite(w_o)):
                raise ValueError("true_system must be a finite vector of length filter_order")
            object.__setattr__(self, "true_system", w_o)
        if not (np.isfinite(self.tracking_q_var) and self.tracking_q_var >= 0.0):
            raise ValueError(f"tracking_q_var must be finite and >= 0, got {self.tracking_q_var!r}")
        if not (isinstance(self.n_iterations, (int, np.integer)) and self.n_iterations >= 1):
            raise ValueError(f"n_iterations must be an integer >= 1, got {self.n_iterations!r}")
        if not (isinstance(self.n_trials, (int, np.integer)) and self.n_trials >= 1):
            raise ValueError(f"n_trials must be an integer >= 1, got {self.n_trials!r}")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if self.initial_weights is not None:
            w0 = np.asarray(self.initial_weights, dtype=float)
            if w0.shape != (p,) or not np.all(np.isfinite(w0)):
                raise ValueError("initial_weights must be a finite vector of length filter_order")
            object.__setattr__(self, "initial_weights", w0)

    def environment(self) -> theory.EnvironmentStats:
        """Second-order description of this experiment for the theory engine.

        The noise variance is the actual variance of the draws; the
        impulsive closed form takes the mixture parameters separately.
        """
        q_trace = self.filter_order * self.tracking_q_var
        if self.regressor.kind == WHITE:
            return theory.EnvironmentStats.white(
                self.filter_order, self.regressor.sigma_x_sq, self.noise.variance, q_trace
            )
        return theory.EnvironmentStats.ar1(
            self.filter_order,
            self.regressor.rho,
            self.regressor.sigma_x_sq,
            self.noise.variance,
            q_trace,
        )


class TrialResult(NamedTuple):
    msd: np.ndarray
    emse: np.ndarray
    diverged: bool


@dataclass(frozen=True)
class LearningCurves:
    """Ensemble-averaged learning curves in dB.

    Diverged trials are excluded from the averages; trials_used counts
    the survivors and diverged records whether any trial was dropped.
    The steady summary is the linear-domain mean of the final tail
    window, left as NaN when any trial diverged (or none survived).
    """

    msd_db: np.ndarray
    emse_db: np.ndarray
    steady_msd_db: float
    diverged: bool
    trials_used: int


def trial_streams(seed, trial_index):
    """The six generators owned by one trial, in fixed order: true
    system, regressor, background noise, impulse gate, impulse
    magnitude, tracking walk.

    Keyed by (seed, trial_index), so any subset of trials can be
    simulated on any schedule without touching the others' draws, and
    switching a noise model from gaussian to impulsive does not shift
    the background sequence.
    """
    root = np.random.SeedSequence(seed, spawn_key=(trial_index,))
    return tuple(np.random.default_rng(child) for child in root.spawn(_STREAMS_PER_TRIAL))


def draw_noise(model: NoiseModel, rng, size=None):
    """Sample the measurement noise; a float when size is None.

    Impulse magnitudes are drawn unconditionally so the gate pattern
    and the amplitudes occupy independent positions in the stream.
    """
    out = math.sqrt(model.sigma_no_sq) * rng.standard_normal(size)
    if model.kind == IMPULSIVE:
        gate = rng.random(size) < model.nu_i
        out = out + gate * (math.sqrt(model.sigma_ni_sq) * rng.standard_normal(size))
    if size is None:
        return float(out)
    return out


class RegressorState:
    """Delay line feeding successive regressor windows (newest first)."""

    __slots__ = ("order", "_line")

    def __init__(self, order: int):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order!r}")
        self.order = int(order)
        self._line = None


def draw_regressor(model: RegressorModel, state: RegressorState, rng) -> np.ndarray:
    """Next regressor vector for one trial.

    White draws are independent between calls; the ar1 kind runs a
    stationary AR(1) scalar process through the state's delay line, so
    consecutive calls overlap in order-1 samples.
    """
    sx = math.sqrt(model.sigma_x_sq)
    if model.kind == WHITE:
        return sx * rng.standard_normal(state.order)
    drive = sx * math.sqrt(1.0 - model.rho * model.rho)
    if state._line is None:
        u = np.empty(state.order)
        u[0] = sx * rng.standard_normal()
        for k in range(1, state.order):
            u[k] = model.rho * u[k - 1] + drive * rng.standard_normal()
        state._line = u[::-1].copy()
    else:
        u_new = model.rho * state._line[0] + drive * rng.standard_normal()
        state._line = np.concatenate(([u_new], state._line[:-1]))
    return state._line.copy()


def _regressor_block(model: RegressorModel, order, n_iterations, rng):
    """All regressors of one trial as an (n_iterations, order) block."""
    sx = math.sqrt(model.sigma_x_sq)
    if model.kind == WHITE:
        return sx * rng.standard_normal((n_iterations, order))
    eps = rng.standard_normal(n_iterations + order - 1)
    drive = (sx * math.sqrt(1.0 - model.rho * model.rho)) * eps
    drive[0] = sx * eps[0]  # stationary start: full variance from sample one
    u = lfilter([1.0], [1.0, -model.rho], drive)
    windows = np.lib.stride_tricks.sliding_window_view(u, order)
    return windows[:, ::-1]


def _noise_block(model: NoiseModel, n_iterations, background_rng, gate_rng, impulse_rng):
    out = math.sqrt(model.sigma_no_sq) * background_rng.standard_normal(n_iterations)
    if model.kind == IMPULSIVE:
        gate = gate_rng.random(n_iterations) < model.nu_i
        out += gate * (math.sqrt(model.sigma_ni_sq) * impulse_rng.standard_normal(n_iterations))
    return out


def _true_system(config: ExperimentConfig, rng):
    if isinstance(config.true_system, str):
        while True:
            v = rng.standard_normal(config.filter_order)
            norm = float(np.linalg.norm(v))
            if norm > 0.0:
                return v / norm
    return np.array(config.true_system, dtype=float)


def _chunk_trials(config: ExperimentConfig) -> int:
    # block memory scales with trials * iterations * order; keep one
    # block near 32 MB so a few can be in flight across workers
    per_trial = max(1, config.n_iterations * config.filter_order)
    return max(1, min(64, 4_000_000 // per_trial))


def _block_curves(config: ExperimentConfig, trial_indices):
    """Simulate a block of trials in lockstep.

    Every operation is elementwise across rows or a reduction along
    the tap axis, so each row is bit-identical to running its trial
    alone; blocking is purely a throughput choice.  Returns per-trial
    linear MSD/EMSE curves and the first diverged iteration per trial
    (n_iterations when the trial survived).
    """
    p = config.filter_order
    n_iter = config.n_iterations
    rows = len(trial_indices)
    spec = config.algorithm
    mu = config.mu
    normalized = spec.kind in filters.NORMALIZED_KINDS

    regressors = np.empty((rows, n_iter, p))
    noise = np.empty((rows, n_iter))
    w_true = np.empty((rows, p))
    walk = np.empty((rows, n_iter, p)) if config.tracking_q_var > 0.0 else None
    for r, trial in enumerate(trial_indices):
        streams = trial_streams(config.seed, trial)
        w_true[r] = _true_system(config, streams[_SYSTEM])
        regressors[r] = _regressor_block(config.regressor, p, n_iter, streams[_REGRESSOR])
        noise[r] = _noise_block(
            config.noise, n_iter, streams[_BACKGROUND], streams[_GATE], streams[_IMPULSE]
        )
        if walk is not None:
            walk[r] = math.sqrt(config.tracking_q_var) * streams[_TRACKING].standard_normal(
                (n_iter, p)
            )

    if config.initial_weights is None:
        weights = np.zeros((rows, p))
    else:
        weights = np.tile(np.asarray(config.initial_weights, dtype=float), (rows, 1))
    msd_rows = np.zeros((rows, n_iter))
    emse_rows = np.zeros((rows, n_iter))
    death = np.full(rows, n_iter)
    alive = np.ones(rows, dtype=bool)

    # dead rows are frozen at zero weights with zero error, so their
    # lanes stay finite; overflow on the step that kills a row is data
    # here, not a fault, hence the suppressed warnings
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for t in range(n_iter):
            x = regressors[:, t, :]
            deviation = w_true - weights
            e_a = np.einsum("ij,ij->i", deviation, x)
            msd = np.einsum("ij,ij->i", deviation, deviation)
            msd_rows[:, t] = msd
            emse_rows[:, t] = e_a * e_a
            bad = alive & (~np.isfinite(msd) | (msd > DIVERGENCE_MSD))
            if bad.any():
                death[bad] = t
                alive &= ~bad
                weights[bad] = 0.0
                if not alive.any():
                    break
            e = np.where(alive, e_a + noise[:, t], 0.0)
            if normalized:
                energy = np.einsum("ij,ij->i", x, x)
                if np.any(energy < filters.DEFAULT_REGRESSOR_EPS):
                    raise DegenerateRegressorError(
                        f"regressor energy below {filters.DEFAULT_REGRESSOR_EPS:.3e}"
                    )
                if spec.kind == filters.NLMS:
                    coef = mu * e / (energy + filters.DEFAULT_REGRESSOR_EPS)
                elif spec.kind == filters.NLMLS:
                    coef = mu * (e * e * e) / (energy * (energy + e * e))
                else:  # NLLAD
                    norm = np.sqrt(energy)
                    coef = mu * e / (norm * (norm + np.abs(e)))
            else:
                coef = mu * filters.update_gain(spec, e)
            weights = weights + coef[:, None] * x
            if walk is not None:
                w_true = w_true + walk[:, t, :]
    return msd_rows, emse_rows, death


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    """One trial's linear MSD/EMSE series, truncated at divergence.

    Deterministic in (config.seed, trial_index) alone.
    """
    if not (isinstance(trial_index, (int, np.integer)) and trial_index >= 0):
        raise ValueError(f"trial_index must be an integer >= 0, got {trial_index!r}")
    msd_rows, emse_rows, death = _block_curves(config, [trial_index])
    stop = int(death[0])
    diverged = stop < config.n_iterations
    return TrialResult(msd_rows[0, :stop].copy(), emse_rows[0, :stop].copy(), diverged)


def run_ensemble(config: ExperimentConfig, *, workers: int = 1, tail_window=None) -> LearningCurves:
    """Ensemble-averaged learning curves over config.n_trials trials.

    The average runs over surviving trials in the linear domain and is
    converted to dB at the end.  Identical configs give bit-identical
    results for any workers value: trial randomness is keyed by trial
    index and the reduction always runs in trial order.
    """
    n_iter = config.n_iterations
    if tail_window is None:
        tail_window = max(1, n_iter // 10)
    if not (isinstance(tail_window, (int, np.integer)) and 1 <= tail_window <= n_iter):
        raise ValueError(f"tail_window must be an integer in [1, n_iterations], got {tail_window!r}")
    chunk = _chunk_trials(config)
    blocks = [
        list(range(start, min(start + chunk, config.n_trials)))
        for start in range(0, config.n_trials, chunk)
    ]

    def reduce_block(trials):
        msd_rows, emse_rows, death = _block_curves(config, trials)
        keep = death == n_iter
        return msd_rows[keep].sum(axis=0), emse_rows[keep].sum(axis=0), int(keep.sum())

    if workers is None or workers <= 1 or len(blocks) == 1:
        parts = [reduce_block(block) for block in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(reduce_block, blocks))

    msd_sum = np.zeros(n_iter)
    emse_sum = np.zeros(n_iter)
    used = 0
    for part_msd, part_emse, part_used in parts:  # fixed trial order
        msd_sum += part_msd
        emse_sum += part_emse
        used += part_used

    diverged = used < config.n_trials
    if used == 0:
        flat = np.full(n_iter, np.nan)
        return LearningCurves(flat, flat.copy(), float("nan"), True, 0)
    msd_mean = msd_sum / used
    emse_mean = emse_sum / used
    with np.errstate(divide="ignore"):
        msd_db = 10.0 * np.log10(msd_mean)
        emse_db = 10.0 * np.log10(emse_mean)
        if diverged:
            steady = float("nan")
        else:
            steady = float(10.0 * np.log10(msd_mean[-tail_window:].mean()))
    return LearningCurves(msd_db, emse_db, steady, diverged, used)
