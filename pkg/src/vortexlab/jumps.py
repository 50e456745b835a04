"""Telegraph-process readout records: synthesis and analysis.

Generates single-shot readout records from a two-state continuous-time
Markov chain with Gaussian IQ noise, then recovers the dynamics with a
hysteretic two-point latching filter, per-state dwell-time statistics, a
two-component Gaussian-mixture clustering of the IQ plane, and the
Boltzmann effective-temperature relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS, PhysicalConstants
from .errors import (AmbiguousBandsError, ClusteringError,
                     InsufficientDwellsError, InvalidParameterError,
                     PopulationInversionError)
from .fitting import TimeTrace, fit_exponential


@dataclass(frozen=True)
class TelegraphParams:
    """Mean dwell times of the two-state process.

    T_up is the mean time spent in the ground state before exciting,
    T_down the mean time in the excited state before relaxing.
    """

    T_up: float
    T_down: float

    def __post_init__(self):
        if not (self.T_up > 0 and self.T_down > 0):
            raise InvalidParameterError("dwell time scales must be positive")

    @property
    def T1(self) -> float:
        """Combined relaxation scale (1/T_up + 1/T_down)^-1 (s)."""
        return 1.0 / (1.0 / self.T_up + 1.0 / self.T_down)

    @property
    def stationary_p_excited(self) -> float:
        return (1.0 / self.T_up) / (1.0 / self.T_up + 1.0 / self.T_down)


@dataclass(frozen=True)
class ReadoutModel:
    """IQ response of the two states: cloud centers, width and timing."""

    center_g: complex
    center_e: complex
    sigma_cloud: float
    tau_m: float      # integration time (s)
    spacing: float    # inter-measurement period (s)

    def __post_init__(self):
        if self.sigma_cloud <= 0:
            raise InvalidParameterError("sigma_cloud must be positive")
        if self.spacing < self.tau_m:
            raise InvalidParameterError("spacing must be at least tau_m")


@dataclass
class Trajectory:
    """Sampled readout record; true_states only exists for synthetic data."""

    times: np.ndarray
    iq_points: np.ndarray
    true_states: np.ndarray | None = None
    assigned_states: np.ndarray | None = None

    def __post_init__(self):
        if self.times.shape != self.iq_points.shape:
            raise InvalidParameterError("times and iq_points must have equal length")


@dataclass
class DwellStats:
    """Fitted mean dwell times and their harmonic combination."""

    T_up_hat: float
    T_down_hat: float
    n_up: int
    n_down: int

    @property
    def T1_hat(self) -> float:
        return 1.0 / (1.0 / self.T_up_hat + 1.0 / self.T_down_hat)


def simulate_trajectory(tg: TelegraphParams, ro: ReadoutModel,
                        duration: float, seed: int) -> Trajectory:
    """Sample a telegraph record with Gaussian IQ noise, reproducibly.

    The underlying two-state Markov chain has exponential dwell times; the
    state is read at intervals of ro.spacing and every IQ point is the
    corresponding cloud center plus independent per-quadrature noise.
    Measurement back-action is not modeled.
    """
    if duration <= 0:
        raise InvalidParameterError("duration must be positive")
    rng = np.random.default_rng(seed)

    state0 = int(rng.random() < tg.stationary_p_excited)
    means = (tg.T_up, tg.T_down)
    jump_times = []
    t, state = 0.0, state0
    while t < duration:
        t += rng.exponential(means[state])
        jump_times.append(t)
        state = 1 - state
    jump_times = np.asarray(jump_times)

    n = int(math.floor(duration / ro.spacing + 1e-9))
    times = np.arange(n) * ro.spacing
    # state at time t flips once per preceding jump
    flips = np.searchsorted(jump_times, times, side="right")
    states = (state0 + flips) % 2

    centers = np.where(states == 1, ro.center_e, ro.center_g)
    noise = rng.normal(0.0, ro.sigma_cloud, size=n) \
        + 1j * rng.normal(0.0, ro.sigma_cloud, size=n)
    return Trajectory(times=times, iq_points=centers + noise,
                      true_states=states)


def latching_filter(traj: Trajectory, ro: ReadoutModel,
                    n_sigma: float = 1.5) -> np.ndarray:
    """Hysteretic state assignment: switch only inside the opposite band.

    A point within n_sigma * sigma_cloud of a cloud center (re)asserts
    that state; points in neither band keep the previous assignment. The
    first point starts from the nearer center. The filter is causal: the
    assignment at index i depends only on points 0..i.
    """
    if abs(ro.center_e - ro.center_g) <= 2.0 * n_sigma * ro.sigma_cloud:
        raise AmbiguousBandsError(
            "acceptance bands overlap: centers closer than "
            f"2 x {n_sigma} sigma")
    z = traj.iq_points
    r = n_sigma * ro.sigma_cloud
    in_g = np.abs(z - ro.center_g) <= r
    in_e = np.abs(z - ro.center_e) <= r

    # assignments change only where a point lands in one band; forward-fill
    events = in_g | in_e
    state_at_event = np.where(in_e, 1, 0)
    idx = np.where(events, np.arange(z.size), -1)
    idx = np.maximum.accumulate(idx)
    initial = int(abs(z[0] - ro.center_e) < abs(z[0] - ro.center_g))
    assigned = np.where(idx >= 0, state_at_event[np.clip(idx, 0, None)], initial)
    traj.assigned_states = assigned.astype(np.int8)
    return traj.assigned_states


def dwell_intervals(states: np.ndarray, spacing: float):
    """Dwell durations per state, discarding the censored end runs."""
    states = np.asarray(states)
    change = np.nonzero(np.diff(states) != 0)[0]
    if change.size < 2:
        return np.array([]), np.array([])
    run_starts = change[:-1] + 1
    run_ends = change[1:] + 1
    lengths = (run_ends - run_starts) * spacing
    run_state = states[run_starts]
    return lengths[run_state == 0], lengths[run_state == 1]


def _fit_dwell_mean(durations: np.ndarray, bins_per_decade: int = 20) -> float:
    """Mean dwell time from an exponential fit to log-binned densities."""
    lo, hi = durations.min(), durations.max()
    if hi <= lo:
        return float(durations.mean())
    n_bins = max(4, int(math.ceil(math.log10(hi / lo) * bins_per_decade)))
    edges = np.geomspace(lo, hi * (1 + 1e-9), n_bins + 1)
    counts, edges = np.histogram(durations, bins=edges)
    widths = np.diff(edges)
    centers = np.sqrt(edges[:-1] * edges[1:])
    keep = counts > 0
    density = counts[keep] / (durations.size * widths[keep])
    sigma = np.sqrt(counts[keep]) / (durations.size * widths[keep])
    trace = TimeTrace(times=centers[keep], values=density, sigma=sigma)
    result = fit_exponential(trace)
    T = result.params["T"]
    if not (result.converged and T > 0):
        return float(durations.mean())
    return float(T)


def dwell_statistics(states: np.ndarray, spacing: float,
                     min_dwells: int = 50) -> DwellStats:
    """Per-state dwell statistics from an assigned-state record.

    Each state needs at least min_dwells complete intervals; the censored
    first and last runs are excluded.
    """
    down_dwells, up_dwells = dwell_intervals(states, spacing)
    # state 0 runs are ground dwells (ending in excitation): T_up scale
    if down_dwells.size < min_dwells or up_dwells.size < min_dwells:
        raise InsufficientDwellsError(
            f"need at least {min_dwells} dwells per state, got "
            f"{down_dwells.size} ground and {up_dwells.size} excited")
    T_up_hat = _fit_dwell_mean(down_dwells)
    T_down_hat = _fit_dwell_mean(up_dwells)
    return DwellStats(T_up_hat=T_up_hat, T_down_hat=T_down_hat,
                      n_up=int(down_dwells.size), n_down=int(up_dwells.size))


# ---------------------------------------------------------------------------
# IQ clustering
# ---------------------------------------------------------------------------

@dataclass
class IqClusters:
    center_g: complex
    center_e: complex
    sigma_cloud: float
    P_e: float
    iterations: int
    log_likelihood: float


def iq_cluster(points: np.ndarray, labels: np.ndarray | None = None,
               max_iter: int = 100, tol: float = 1e-8) -> IqClusters:
    """Two-component isotropic Gaussian mixture of the IQ plane via EM.

    Without labels the more populated component is called the ground
    state; with per-point labels (0 ground, 1 excited) the components are
    matched to the labels by majority vote. P_e is the weight of the
    excited component.
    """
    z = np.asarray(points).astype(complex)
    if z.size < 1000:
        raise InvalidParameterError("need at least 1000 points for clustering")
    xy = np.column_stack([z.real, z.imag])

    # two-seed start: most separated pair among the first 1000 points
    head = xy[:1000]
    d0 = np.linalg.norm(head - head[0], axis=1)
    seed1 = head[int(np.argmax(d0))]
    d1 = np.linalg.norm(head - seed1, axis=1)
    seed2 = head[int(np.argmax(d1))]
    mu = np.array([seed1, seed2])
    if not np.any(mu[0] != mu[1]):
        raise ClusteringError("could not find two distinct cluster seeds")
    var = max(xy.var(axis=0).sum() / 2.0, 1e-30)
    weights = np.array([0.5, 0.5])

    loglik = -np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = ((xy[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
        log_p = np.log(weights)[None, :] - d2 / (2 * var) \
            - math.log(2 * math.pi * var)
        mx = log_p.max(axis=1, keepdims=True)
        lse = mx[:, 0] + np.log(np.exp(log_p - mx).sum(axis=1))
        resp = np.exp(log_p - lse[:, None])
        new_loglik = float(lse.sum())

        nk = resp.sum(axis=0)
        if np.any(nk < 1e-9):
            raise ClusteringError("a mixture component collapsed to zero weight")
        mu = (resp.T @ xy) / nk[:, None]
        d2 = ((xy[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
        var = max(float((resp * d2).sum() / (2.0 * z.size)), 1e-300)
        weights = nk / z.size

        if abs(new_loglik - loglik) < tol * max(1.0, abs(new_loglik)):
            loglik = new_loglik
            break
        loglik = new_loglik

    sigma = math.sqrt(var)
    sep = np.linalg.norm(mu[0] - mu[1])
    if sep < 0.5 * sigma:
        raise ClusteringError(
            f"cluster centers separated by {sep:.3g} < sigma/2 = "
            f"{0.5 * sigma:.3g}; data look like a single cloud")

    if labels is not None:
        labels = np.asarray(labels)
        d2 = ((xy[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
        hard = np.argmax(-d2, axis=1)
        # component 0 is ground if it captures the majority of label-0 points
        match0 = (hard[labels == 0] == 0).mean() if np.any(labels == 0) else 0.5
        ground_idx = 0 if match0 >= 0.5 else 1
    else:
        ground_idx = int(np.argmax(weights))
    excited_idx = 1 - ground_idx

    return IqClusters(
        center_g=complex(mu[ground_idx, 0], mu[ground_idx, 1]),
        center_e=complex(mu[excited_idx, 0], mu[excited_idx, 1]),
        sigma_cloud=sigma, P_e=float(weights[excited_idx]),
        iterations=iterations, log_likelihood=loglik)


# ---------------------------------------------------------------------------
# thermal relations
# ---------------------------------------------------------------------------

def thermal_population(T: float, f_q: float,
                       consts: PhysicalConstants = CONSTANTS) -> float:
    """Boltzmann excited-state population at temperature T (K)."""
    if T <= 0 or f_q <= 0:
        raise InvalidParameterError("temperature and frequency must be positive")
    boltz = math.exp(-consts.h * f_q / (consts.k_B * T))
    return boltz / (1.0 + boltz)


def effective_temperature(P_e: float, f_q: float,
                          consts: PhysicalConstants = CONSTANTS) -> float:
    """Temperature (K) whose Boltzmann factor reproduces P_e; inverse of
    thermal_population."""
    if not (0.0 < P_e):
        raise InvalidParameterError("P_e must be positive")
    if P_e >= 0.5:
        raise PopulationInversionError(
            f"P_e = {P_e} >= 0.5 is a population inversion, not a thermal "
            "state")
    if f_q <= 0:
        raise InvalidParameterError("frequency must be positive")
    # log1p form stays finite for populations down to the denormal range
    log_ratio = math.log1p(-P_e) - math.log(P_e)
    return consts.h * f_q / (consts.k_B * log_ratio)
