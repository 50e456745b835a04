"""Damped Gauss-Newton least squares plus the physics fitters built on it.

The engine is a Levenberg-style damped Gauss-Newton loop with a forward
finite-difference Jacobian and Fletcher scaling of the damping term, so
parameters with wildly different units (Hz next to tesla) stay
well-conditioned. Weighted residuals are (model - data) / sigma with a
default sigma of 1.

Convergence reporting: the scaled gradient measure is the largest
per-parameter cosine  max_i |(J^T r)_i| / (|J_i| (|r| + 1e-8 |r_init|)),
with J_i the i-th Jacobian column. It is dimensionless, vanishes at any
least squares minimum with appreciable residual, is insensitive to a
single wild column (e.g. from a model discontinuity), and the floor term
keeps it small once the residual has dropped eight orders below its
starting point (a solved problem).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rabi
from .errors import DegenerateFitError, InvalidParameterError

_TINY = 1e-300


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    params: dict[str, float]
    std_errors: dict[str, float]
    residual_norm: float
    iterations: int
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    gradient_measure: float = math.nan
    message: str = ""


@dataclass
class TimeTrace:
    """Uniformly or non-uniformly sampled signal versus time (s)."""

    times: np.ndarray
    values: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise InvalidParameterError("times and values must be 1D and equal length")
        if not np.all(np.diff(self.times) > 0):
            raise InvalidParameterError("times must be strictly ascending")
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.times.shape or not np.all(self.sigma > 0):
                raise InvalidParameterError("sigma must be positive, one per point")

    @property
    def weights(self) -> np.ndarray:
        if self.sigma is None:
            return np.ones_like(self.times)
        return 1.0 / self.sigma


@dataclass
class SpectrumDataset:
    """Qubit and resonator transition points with uncertainties.

    Each row is (B in T, f in Hz, sigma in Hz).
    """

    qubit_points: np.ndarray
    resonator_points: np.ndarray

    def __post_init__(self):
        self.qubit_points = np.asarray(self.qubit_points, dtype=float).reshape(-1, 3)
        self.resonator_points = np.asarray(self.resonator_points, dtype=float).reshape(-1, 3)
        total = len(self.qubit_points) + len(self.resonator_points)
        if total < 4:
            raise InvalidParameterError("need at least 4 points for a joint fit")
        for pts in (self.qubit_points, self.resonator_points):
            if len(pts) and not np.all(pts[:, 2] > 0):
                raise InvalidParameterError("sigma must be positive")


# ---------------------------------------------------------------------------
# generic engine
# ---------------------------------------------------------------------------

def _fd_jacobian(call, p: np.ndarray, r0: np.ndarray,
                 rel_step: float, abs_floor: float) -> np.ndarray:
    J = np.empty((r0.size, p.size))
    for i in range(p.size):
        h = rel_step * abs(p[i])
        if h < abs_floor:
            h = abs_floor
        pp = p.copy()
        pp[i] += h
        J[:, i] = (call(pp) - r0) / h
    return J


def _std_errors(J: np.ndarray, cost: float, n_points: int) -> np.ndarray:
    """Per-parameter standard errors from the Jacobian at the optimum.

    The analysis runs on the column-normalized Jacobian so that parameters
    with wildly different units are treated on the same footing.
    Directions the residual does not depend on get infinite errors; the
    rest use the usual covariance s^2 (J^T J)^-1 with s^2 the reduced
    chi-square of the weighted residuals.
    """
    n = J.shape[1]
    se = np.full(n, np.inf)
    col = np.sqrt((J * J).sum(axis=0))
    alive = col > 0.0
    if not alive.any():
        return se
    Jn = J[:, alive] / col[alive]
    k = int(alive.sum())
    dof = n_points - k
    if dof <= 0:
        return se
    s2 = cost / dof
    w, V = np.linalg.eigh(Jn.T @ Jn)
    good = w > max(w.max(), 0.0) * 1e-12
    var = np.full(k, np.inf)
    if good.any():
        contrib = (V[:, good] ** 2) / w[good]
        var_good = s2 * contrib.sum(axis=1) / col[alive] ** 2
        # a parameter overlapping a null direction stays unidentifiable
        null_overlap = (V[:, ~good] ** 2).sum(axis=1) if (~good).any() \
            else np.zeros(k)
        var = np.where(null_overlap > 1e-9, np.inf, var_good)
    se[alive] = np.sqrt(var)
    return se


def least_squares(residual_fn: Callable, init: dict[str, float], data=None, *,
                  gtol: float = 1e-10, xtol: float = 1e-12, max_iter: int = 200,
                  rel_step: float = 1e-6, abs_floor: float = 1e-12) -> FitResult:
    """Minimize |residual(params)|^2 over the named parameters in init.

    residual_fn(params_dict) -> array, or residual_fn(params_dict, data)
    when data is given. Singular Jacobians are handled by damping; if no
    damped step reduces the cost the result comes back converged=False
    rather than raising.
    """
    names = list(init)
    p = np.array([float(init[k]) for k in names])
    if not np.all(np.isfinite(p)):
        raise InvalidParameterError("initial parameters must be finite")

    def call(pvec: np.ndarray) -> np.ndarray:
        d = dict(zip(names, pvec))
        r = residual_fn(d, data) if data is not None else residual_fn(d)
        return np.atleast_1d(np.asarray(r, dtype=float)).ravel()

    r = call(p)
    if not np.all(np.isfinite(r)):
        raise InvalidParameterError("residual is not finite at the initial point")
    cost = float(r @ r)
    history = [math.sqrt(cost)]
    r_floor = 1e-8 * math.sqrt(cost)
    lam = 1e-3
    converged = False
    message = "max iterations reached"
    iterations = 0
    small_steps = 0
    J = _fd_jacobian(call, p, r, rel_step, abs_floor)

    def gradient_measure(Jc, rc, costc):
        col = np.sqrt((Jc * Jc).sum(axis=0))
        num = np.abs(Jc.T @ rc)
        denom = col * (math.sqrt(costc) + r_floor) + _TINY
        return float((num / denom).max())

    for it in range(1, max_iter + 1):
        g = J.T @ r
        gmeas = gradient_measure(J, r, cost)
        if gmeas <= gtol and bool(np.any(J != 0.0)):
            converged = True
            message = "gradient tolerance reached"
            break

        # Fletcher-scaled damped step, solved in column-normalized
        # variables so parameters with disparate units stay conditioned
        col = np.sqrt((J * J).sum(axis=0))
        scale = np.where(col > 0.0, col, 1.0)
        Jn = J / scale
        JtJ_n = Jn.T @ Jn
        g_n = g / scale

        accepted = False
        while lam <= 1e14:
            A = JtJ_n + lam * np.eye(p.size)
            try:
                delta_n = np.linalg.solve(A, -g_n)
            except np.linalg.LinAlgError:
                delta_n = np.linalg.lstsq(A, -g_n, rcond=None)[0]
            delta = delta_n / scale
            if np.all(np.isfinite(delta)):
                p_new = p + delta
                r_new = call(p_new)
                if np.all(np.isfinite(r_new)):
                    cost_new = float(r_new @ r_new)
                    if cost_new <= cost:
                        accepted = True
                        break
            lam *= 4.0
        if not accepted:
            iterations = it
            converged = False
            message = "no damped step reduced the residual"
            break

        # step size in the column-scaled space (every parameter on a
        # comparable, residual-units footing) and in plain parameter
        # space; both must settle, or a direction whose Jacobian column
        # vanishes with the parameter would freeze prematurely
        step_rel = max(
            float(np.linalg.norm(delta_n) / (np.linalg.norm(p * scale) + _TINY)),
            float(np.linalg.norm(delta) / (np.linalg.norm(p) + _TINY)))
        p, r, cost = p_new, r_new, cost_new
        history.append(math.sqrt(cost))
        iterations = it
        lam = max(lam * 0.3, 1e-14)
        J = _fd_jacobian(call, p, r, rel_step, abs_floor)
        # demand two consecutive sub-tolerance steps so the iterate is
        # polished to the fixed point, not merely slowing down
        small_steps = small_steps + 1 if step_rel <= xtol else 0
        if small_steps >= 2:
            converged = True
            message = "step tolerance reached"
            break

    if converged:
        # polish: two near-Newton steps pin the iterate to the fixed point
        # (makes the result independent of the approach path, e.g. of the
        # ordering of the data points)
        for _ in range(2):
            col = np.sqrt((J * J).sum(axis=0))
            scale = np.where(col > 0.0, col, 1.0)
            Jn = J / scale
            A = Jn.T @ Jn + 1e-14 * np.eye(p.size)
            try:
                delta = np.linalg.solve(A, -(J.T @ r) / scale) / scale
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(delta)):
                break
            p_new = p + delta
            r_new = call(p_new)
            if not np.all(np.isfinite(r_new)):
                break
            cost_new = float(r_new @ r_new)
            if cost_new > cost:
                break
            p, r, cost = p_new, r_new, cost_new
            history.append(math.sqrt(cost))
            J = _fd_jacobian(call, p, r, rel_step, abs_floor)

    gmeas = gradient_measure(J, r, cost)
    se = _std_errors(J, cost, r.size)
    return FitResult(params=dict(zip(names, p.tolist())),
                     std_errors=dict(zip(names, se.tolist())),
                     residual_norm=math.sqrt(cost), iterations=iterations,
                     converged=converged, residual_history=history,
                     gradient_measure=gmeas, message=message)


def _safe_exp(x):
    return np.exp(np.clip(x, -700.0, 700.0))


# ---------------------------------------------------------------------------
# spectrum fitters
# ---------------------------------------------------------------------------

def hyperbola(B, f_q0, gamma, B0):
    """Qubit branch sqrt(f_q0^2 + gamma^2 (B - B0)^2)."""
    return np.sqrt(f_q0**2 + (gamma * (np.asarray(B, dtype=float) - B0)) ** 2)


def fit_hyperbola(points) -> FitResult:
    """Fit (B, f[, sigma]) qubit points with the field hyperbola.

    Initialization: B0 at the minimum-frequency point, f_q0 the minimum
    frequency, gamma the outermost secant slope.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DegenerateFitError("need at least 3 (B, f) points")
    B, f = pts[:, 0], pts[:, 1]
    w = 1.0 / pts[:, 2] if pts.shape[1] > 2 else np.ones_like(B)
    if np.unique(B).size < 2:
        raise DegenerateFitError("all fields identical, hyperbola unconstrained")

    imin = int(np.argmin(f))
    B0_init = float(B[imin])
    f_q0_init = float(f[imin])
    ilo, ihi = int(np.argmin(B)), int(np.argmax(B))
    slopes = []
    for i in (ilo, ihi):
        dB = B[i] - B0_init
        if dB != 0.0:
            slopes.append(abs(f[i] - f_q0_init) / abs(dB))
    gamma_init = max(slopes) if slopes else abs(f.max() - f.min()) / np.ptp(B)
    if gamma_init == 0.0:
        gamma_init = f_q0_init / max(np.ptp(B), 1e-12)

    def resid(p):
        return (hyperbola(B, p["f_q0"], p["gamma"], p["B0"]) - f) * w

    result = least_squares(resid, {"f_q0": f_q0_init, "gamma": gamma_init,
                                   "B0": B0_init})
    result.params["f_q0"] = abs(result.params["f_q0"])
    result.params["gamma"] = abs(result.params["gamma"])
    return result


def fit_joint_aqrm(dataset: SpectrumDataset, init: dict[str, float] | None,
                   trunc: rabi.HilbertTruncation) -> FitResult:
    """Joint fit of qubit and resonator branches to the asymmetric model.

    Qubit points are matched against the dressed qubit transition and
    resonator points against the ground-branch resonator transition, both
    from exact diagonalization. Fields where state labeling fails are
    penalized with a large constant residual instead of aborting the fit.

    Free parameters: f_r, g, gamma, B0, f_q0. Missing initial values are
    filled in from the data: f_r from the median resonator frequency, B0
    from the minimum-f_q point, gamma from the outermost secant slope,
    f_q0 from the minimum qubit frequency, g defaults to 0.5% of f_r.
    """
    init = dict(init or {})
    qp, rp = dataset.qubit_points, dataset.resonator_points

    if "f_r" not in init:
        if len(rp) == 0:
            raise DegenerateFitError("no resonator points and no f_r initial value")
        init["f_r"] = float(np.median(rp[:, 1]))
    if len(qp):
        imin = int(np.argmin(qp[:, 1]))
        init.setdefault("B0", float(qp[imin, 0]))
        init.setdefault("f_q0", float(qp[imin, 1]))
        if "gamma" not in init:
            hyp = fit_hyperbola(qp) if len(qp) >= 3 else None
            if hyp is not None and hyp.converged:
                init["gamma"] = hyp.params["gamma"]
            else:
                span = np.ptp(qp[:, 0])
                init["gamma"] = (np.ptp(qp[:, 1]) / span) if span > 0 else 1e12
    for key in ("B0", "f_q0", "gamma"):
        if key not in init:
            raise DegenerateFitError(f"no qubit points and no {key} initial value")
    init.setdefault("g", 0.005 * init["f_r"])
    init = {k: init[k] for k in ("f_r", "g", "gamma", "B0", "f_q0")}

    penalty = 1e6

    def resid(p):
        params = rabi.QrmParams.asymmetric(
            f_r=abs(p["f_r"]), g=abs(p["g"]), gamma=abs(p["gamma"]),
            B0=p["B0"], f_q0=abs(p["f_q0"]))
        out = np.empty(len(qp) + len(rp))
        i = 0
        for B, fmeas, sig in qp:
            try:
                spec = rabi.solve_qrm(params, B, trunc)
                out[i] = (spec.f_q_dressed - fmeas) / sig
            except Exception:
                out[i] = penalty
            i += 1
        for B, fmeas, sig in rp:
            try:
                spec = rabi.solve_qrm(params, B, trunc)
                out[i] = (spec.f_r_g - fmeas) / sig
            except Exception:
                out[i] = penalty
            i += 1
        return out

    result = least_squares(resid, init)
    for key in ("f_r", "g", "gamma", "f_q0"):
        result.params[key] = abs(result.params[key])
    return result


# ---------------------------------------------------------------------------
# time-domain fitters
# ---------------------------------------------------------------------------

def fit_exponential(trace: TimeTrace) -> FitResult:
    """Fit A exp(-t/T) + c; params are T, A, c."""
    t, v, w = trace.times, trace.values, trace.weights
    if t.size < 4:
        raise DegenerateFitError("need at least 4 points")
    tail = max(1, t.size // 10)
    c0 = float(v[-tail:].mean())
    A0 = float(v[0] - c0)
    T0 = float(t[-1] - t[0]) / 3.0
    if A0 != 0.0:
        below = np.nonzero(np.abs(v - c0) < abs(A0) / math.e)[0]
        if below.size:
            T0 = max(float(t[below[0]] - t[0]), float(t[1] - t[0]))

    def resid(p):
        return (p["A"] * _safe_exp(-t / p["T"]) + p["c"] - v) * w

    result = least_squares(resid, {"T": T0, "A": A0, "c": c0})
    if not math.isfinite(result.std_errors["T"]) or \
            result.std_errors["T"] > abs(result.params["T"]):
        result.message += "; time constant unidentifiable"
    return result


def _fft_peaks(t: np.ndarray, v: np.ndarray, n_peaks: int) -> list[float]:
    """Dominant positive frequencies of a roughly uniform trace."""
    dt = float(np.mean(np.diff(t)))
    spec = np.abs(np.fft.rfft(v - v.mean()))
    freqs = np.fft.rfftfreq(t.size, dt)
    spec[0] = 0.0
    order = np.argsort(spec)[::-1]
    found: list[float] = []
    for idx in order:
        f = float(freqs[idx])
        if f <= 0:
            continue
        if all(abs(f - f0) > freqs[1] for f0 in found):
            found.append(f)
        if len(found) == n_peaks:
            break
    return found


def fit_ramsey_beat(trace: TimeTrace) -> FitResult:
    """Fit two equally damped cosines sharing one decay envelope.

    Model: exp(-t/T2s) [a1 cos(2 pi f1 t + phi1) + a2 cos(2 pi f2 t + phi2)] + c.
    The beat |f1 - f2| is reported as f_beat; when the trace is too short
    to resolve it (|f1 - f2| t_max < 0.5) the beat is flagged
    unidentifiable with an infinite standard error.
    """
    t, v, w = trace.times, trace.values, trace.weights
    if t.size < 10:
        raise DegenerateFitError("need at least 10 points")
    t_span = float(t[-1] - t[0])
    peaks = _fft_peaks(t, v, 2)
    if not peaks:
        f1_init = 1.0 / t_span
        f2_init = 2.0 / t_span
    elif len(peaks) == 1:
        f1_init = peaks[0]
        f2_init = peaks[0] + 1.0 / t_span
    else:
        f1_init, f2_init = peaks[0], peaks[1]
    amp0 = float(np.ptp(v)) / 4.0 or 1.0

    def resid(p):
        envelope = _safe_exp(-t / p["T2s"])
        model = envelope * (p["a1"] * np.cos(2 * np.pi * p["f1"] * t + p["phi1"])
                            + p["a2"] * np.cos(2 * np.pi * p["f2"] * t + p["phi2"])) + p["c"]
        return (model - v) * w

    result = least_squares(resid, {"T2s": t_span / 3.0, "f1": f1_init,
                                   "f2": f2_init, "a1": amp0, "a2": amp0,
                                   "phi1": 0.0, "phi2": 0.0,
                                   "c": float(v.mean())})
    f1, f2 = result.params["f1"], result.params["f2"]
    result.params["f_beat"] = abs(f1 - f2)
    se1, se2 = result.std_errors["f1"], result.std_errors["f2"]
    result.std_errors["f_beat"] = math.hypot(se1, se2) \
        if math.isfinite(se1) and math.isfinite(se2) else math.inf
    if abs(f1 - f2) * t_span < 0.5:
        result.std_errors["f_beat"] = math.inf
        result.message += "; beat unidentifiable on this time span"
    return result


def fit_damped_cosine(trace: TimeTrace) -> FitResult:
    """Fit c + A exp(-t/tau) cos(2 pi f t + phi); params A, f, phi, tau, c."""
    t, v, w = trace.times, trace.values, trace.weights
    if t.size < 6:
        raise DegenerateFitError("need at least 6 points")
    peaks = _fft_peaks(t, v, 1)
    t_span = float(t[-1] - t[0])
    f_init = peaks[0] if peaks else 1.0 / t_span

    def resid(p):
        model = (p["c"] + p["A"] * _safe_exp(-t / p["tau"])
                 * np.cos(2 * np.pi * p["f"] * t + p["phi"]))
        return (model - v) * w

    return least_squares(resid, {"A": float(np.ptp(v)) / 2.0 or 1.0,
                                 "f": f_init, "phi": 0.0, "tau": t_span,
                                 "c": float(v.mean())})


def fit_rabi_linear(scans: Sequence[tuple[float, TimeTrace]]):
    """Per-amplitude coherent-oscillation frequencies plus a linear law.

    Each trace is fit with a damped cosine to extract the oscillation
    frequency Omega; a zero-amplitude scan contributes Omega = 0 directly.
    The Omega values are then fit with a zero-intercept line Omega =
    slope * amplitude. Non-oscillating traces are excluded and reported in
    the warnings list.

    Returns (fit, omegas, warnings) where fit carries the slope in Hz per
    drive unit and omegas maps amplitude -> Omega (Hz).
    """
    omegas: dict[float, float] = {}
    warnings: list[str] = []
    for amplitude, trace in scans:
        if amplitude == 0.0:
            omegas[amplitude] = 0.0
            continue
        span = float(np.ptp(trace.values))
        if span == 0.0:
            warnings.append(
                f"amplitude {amplitude}: no resolvable oscillation, excluded")
            continue
        res = fit_damped_cosine(trace)
        t_span = float(trace.times[-1] - trace.times[0])
        f_fit = abs(res.params["f"])
        if (not res.converged or f_fit * t_span < 1.0
                or abs(res.params["A"]) < 0.05 * span):
            warnings.append(
                f"amplitude {amplitude}: no resolvable oscillation, excluded")
            continue
        omegas[amplitude] = f_fit
    if not omegas:
        raise DegenerateFitError("no scan produced a usable oscillation")

    amps = np.array(list(omegas))
    oms = np.array([omegas[a] for a in amps])
    saa = float(amps @ amps)
    if saa == 0.0:
        raise DegenerateFitError("need at least one nonzero drive amplitude")
    slope = float(amps @ oms) / saa
    resid = oms - slope * amps
    dof = len(amps) - 1
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    fit = FitResult(params={"slope": slope},
                    std_errors={"slope": math.sqrt(s2 / saa)},
                    residual_norm=float(np.linalg.norm(resid)),
                    iterations=0, converged=True,
                    residual_history=[float(np.linalg.norm(resid))],
                    gradient_measure=0.0, message="closed-form linear fit")
    return fit, omegas, warnings


# ---------------------------------------------------------------------------
# single-port reflection
# ---------------------------------------------------------------------------

def reflection_s11(f, f_r: float, kappa_int: float, kappa_ext: float):
    """Complex single-port reflection coefficient near one resonance."""
    if kappa_int < 0 or kappa_ext <= 0:
        raise InvalidParameterError("need kappa_int >= 0 and kappa_ext > 0")
    delta = np.asarray(f, dtype=float) - f_r
    return ((1j * delta + (kappa_int - kappa_ext) / 2.0)
            / (1j * delta + (kappa_int + kappa_ext) / 2.0))


def reflection_phase(f, f_r: float, kappa_int: float, kappa_ext: float):
    """Phase of the reflection coefficient (rad).

    Far off resonance the phase tends to zero; a lossless overcoupled
    resonator reflects with phase pi on resonance and the phase rolls
    through a full 2 pi when kappa_ext > kappa_int.
    """
    return np.angle(reflection_s11(f, f_r, kappa_int, kappa_ext))


def fit_reflection_phase(freqs, phases, init: dict[str, float]) -> FitResult:
    """Fit measured phase vs frequency; params f_r, kappa_int, kappa_ext."""
    freqs = np.asarray(freqs, dtype=float)
    phases = np.asarray(phases, dtype=float)

    def resid(p):
        model = reflection_phase(freqs, p["f_r"], abs(p["kappa_int"]),
                                 abs(p["kappa_ext"]))
        d = model - phases
        return np.arctan2(np.sin(d), np.cos(d))  # wrap-safe phase residual

    result = least_squares(resid, {"f_r": init["f_r"],
                                   "kappa_int": init["kappa_int"],
                                   "kappa_ext": init["kappa_ext"]})
    result.params["kappa_int"] = abs(result.params["kappa_int"])
    result.params["kappa_ext"] = abs(result.params["kappa_ext"])
    return result
