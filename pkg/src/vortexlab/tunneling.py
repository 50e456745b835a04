"""Finite-difference Schrodinger solver for a vortex pinned in the landscape.

Discretizes  H = hbar Omega [ -y_zpf^2 laplacian + V / (hbar Omega) ]  on a
uniform grid with Dirichlet boundaries and a second-order central-difference
Laplacian, then extracts the lowest eigenpairs with a symmetric Lanczos
iteration using full reorthogonalization. The kinetic coefficient
hbar Omega y_zpf^2 equals hbar^2 / 2 m for the effective mass implied by
y_zpf = sqrt(hbar / 2 m Omega), so the mass never has to be specified
directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .constants import CONSTANTS
from .core import DeviceModel, DerivedScales
from .energetics import PinningSite, total_potential, well_detuning
from .errors import (EigensolverError, InvalidParameterError,
                     ReductionInvalidError)


@dataclass(frozen=True)
class Grid:
    """Uniform 1D or 2D grid. Dirichlet boundaries sit just outside."""

    x_min: float
    x_max: float
    nx: int
    y_min: float | None = None
    y_max: float | None = None
    ny: int | None = None

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise InvalidParameterError("x_max must exceed x_min")
        if self.nx < 64:
            raise InvalidParameterError("need at least 64 points per axis")
        two_d = [v is not None for v in (self.y_min, self.y_max, self.ny)]
        if any(two_d) and not all(two_d):
            raise InvalidParameterError("specify all of y_min, y_max, ny or none")
        if all(two_d):
            if self.y_max <= self.y_min:
                raise InvalidParameterError("y_max must exceed y_min")
            if self.ny < 64:
                raise InvalidParameterError("need at least 64 points per axis")

    @property
    def dimension(self) -> int:
        return 2 if self.ny is not None else 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        if self.ny is None:
            raise InvalidParameterError("1D grid has no y axis")
        return np.linspace(self.y_min, self.y_max, self.ny)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        if self.ny is None:
            raise InvalidParameterError("1D grid has no y axis")
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def size(self) -> int:
        return self.nx * (self.ny or 1)

    @property
    def cell(self) -> float:
        """Volume element of the grid inner product."""
        return self.dx * (self.dy if self.ny is not None else 1.0)


def grid_for_sites(sites: Sequence[PinningSite], points: int = 1024,
                   margin_sigmas: float = 5.0) -> Grid:
    """1D grid spanning all pinning sites plus a margin of margin_sigmas."""
    if not sites:
        raise InvalidParameterError("need at least one pinning site")
    lo = min(s.x_i - margin_sigmas * s.sigma_i for s in sites)
    hi = max(s.x_i + margin_sigmas * s.sigma_i for s in sites)
    return Grid(x_min=lo, x_max=hi, nx=points)


@dataclass(frozen=True)
class TunnelModel:
    """Kinetic scale of the pinned vortex.

    y_zpf is the zero-point length, Omega the well curvature frequency
    (rad/s). An optional explicit mass must agree with
    y_zpf = sqrt(hbar / 2 m_v Omega) to a part in 1e6.
    """

    y_zpf: float
    Omega: float
    m_v: float | None = None

    def __post_init__(self):
        if not (self.y_zpf > 0 and self.Omega > 0):
            raise InvalidParameterError("y_zpf and Omega must be positive")
        if self.m_v is not None:
            implied = math.sqrt(CONSTANTS.hbar / (2.0 * self.m_v * self.Omega))
            if abs(implied - self.y_zpf) > 1e-6 * self.y_zpf:
                raise InvalidParameterError(
                    f"m_v implies y_zpf = {implied}, inconsistent with "
                    f"{self.y_zpf}")

    @property
    def mass(self) -> float:
        """Effective mass implied by the zero-point length (kg)."""
        if self.m_v is not None:
            return self.m_v
        return CONSTANTS.hbar / (2.0 * self.y_zpf**2 * self.Omega)

    @property
    def kinetic_coefficient(self) -> float:
        """hbar Omega y_zpf^2 = hbar^2 / 2 m (J m^2)."""
        return CONSTANTS.hbar * self.Omega * self.y_zpf**2


@dataclass
class EigenResult:
    """Lowest eigenpairs on the grid; wavefunction rows are L2-normalized."""

    energies: np.ndarray
    wavefunctions: np.ndarray
    grid: Grid
    B: float | None = None

    @property
    def splitting(self) -> float:
        """E1 - E0 (J)."""
        return float(self.energies[1] - self.energies[0])


# ---------------------------------------------------------------------------
# Lanczos with full reorthogonalization
# ---------------------------------------------------------------------------

def lanczos_lowest(matvec: Callable[[np.ndarray], np.ndarray], dim: int,
                   k: int, m: int, rng: np.random.Generator,
                   start: np.ndarray | None = None):
    """Lowest k Ritz pairs from an m-step Lanczos iteration.

    Full reorthogonalization (applied twice per step) keeps the basis
    orthonormal; on breakdown the iteration restarts with a fresh random
    vector orthogonal to everything found so far. An optional start vector
    (for instance eigenvectors of a nearby problem) accelerates
    convergence.
    """
    m = min(m, dim)
    Q = np.zeros((dim, m))
    alphas = np.zeros(m)
    betas = np.zeros(max(m - 1, 0))

    if start is not None and np.linalg.norm(start) > 0:
        q = np.asarray(start, dtype=float) \
            + 1e-6 * np.linalg.norm(start) * rng.standard_normal(dim)
    else:
        q = rng.standard_normal(dim)
    q /= np.linalg.norm(q)
    j = 0
    op_scale = 0.0
    while j < m:
        Q[:, j] = q
        u = matvec(q)
        op_scale = max(op_scale, float(np.linalg.norm(u)))
        alphas[j] = q @ u
        u -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ u)
        u -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ u)
        beta = np.linalg.norm(u)
        if j + 1 == m:
            break
        if beta < 1e-13 * op_scale:
            # invariant subspace found; restart against it
            u = rng.standard_normal(dim)
            u -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ u)
            nrm = np.linalg.norm(u)
            if nrm < 1e-14:
                m = j + 1
                break
            q = u / nrm
            betas[j] = 0.0
        else:
            q = u / beta
            betas[j] = beta
        j += 1

    T = (np.diag(alphas[:m]) + np.diag(betas[:m - 1], 1)
         + np.diag(betas[:m - 1], -1))
    evals, S = np.linalg.eigh(T)
    kk = min(k, m)
    ritz_vals = evals[:kk]
    ritz_vecs = Q[:, :m] @ S[:, :kk]
    residuals = np.array([np.linalg.norm(matvec(ritz_vecs[:, i])
                                         - ritz_vals[i] * ritz_vecs[:, i])
                          for i in range(kk)])
    return ritz_vals, ritz_vecs, residuals


def _laplacian_matvec(grid: Grid) -> Callable[[np.ndarray], np.ndarray]:
    if grid.dimension == 1:
        inv_dx2 = 1.0 / grid.dx**2

        def lap(v: np.ndarray) -> np.ndarray:
            out = -2.0 * v * inv_dx2
            out[:-1] += v[1:] * inv_dx2
            out[1:] += v[:-1] * inv_dx2
            return out

        return lap

    nx, ny = grid.nx, grid.ny
    inv_dx2, inv_dy2 = 1.0 / grid.dx**2, 1.0 / grid.dy**2

    def lap2(v: np.ndarray) -> np.ndarray:
        f = v.reshape(nx, ny)
        out = -2.0 * (inv_dx2 + inv_dy2) * f
        out[:-1, :] += f[1:, :] * inv_dx2
        out[1:, :] += f[:-1, :] * inv_dx2
        out[:, :-1] += f[:, 1:] * inv_dy2
        out[:, 1:] += f[:, :-1] * inv_dy2
        return out.reshape(-1)

    return lap2


def solve_schrodinger(grid: Grid, potential: np.ndarray, model: TunnelModel,
                      k: int = 2, seed: int = 11,
                      start: np.ndarray | None = None) -> EigenResult:
    """Lowest k eigenpairs of the discretized pinned-vortex Hamiltonian.

    potential is the energy field (J) sampled on the grid, shape (nx,) or
    (nx, ny). An optional start vector warm-starts the iteration (used by
    field sweeps). Raises EigensolverError with the residual norms if the
    iteration cannot converge.

    Exactly degenerate multiplets (possible in symmetric 2D potentials)
    are not resolved: a single Krylov sequence returns one combination per
    degenerate subspace.
    """
    if not (1 <= k <= 10):
        raise InvalidParameterError("k must be between 1 and 10")
    V = np.asarray(potential, dtype=float).reshape(-1)
    if V.size != grid.size:
        raise InvalidParameterError(
            f"potential has {V.size} samples, grid has {grid.size}")
    K = model.kinetic_coefficient
    lap = _laplacian_matvec(grid)

    # work in units of the spectral scale so the iteration sees O(1) numbers
    kin_scale = 4.0 / grid.dx**2
    if grid.dimension == 2:
        kin_scale += 4.0 / grid.dy**2
    scale = abs(K) * kin_scale + float(np.abs(V).max())
    Ks = K / scale
    Vs = V / scale

    def matvec(v: np.ndarray) -> np.ndarray:
        return -Ks * lap(v) + Vs * v

    rng = np.random.default_rng(seed)
    dim = grid.size
    tol = 1e-10

    m = max(8 * k, 96)
    best = None
    while True:
        vals, vecs, residuals = lanczos_lowest(matvec, dim, k, m, rng,
                                               start=start)
        best = (vals, vecs, residuals)
        if vals.size >= k and np.all(residuals <= tol):
            break
        if m >= min(dim, 4096):
            raise EigensolverError(
                f"Lanczos did not converge with {m} vectors",
                residuals=residuals * scale)
        m *= 2

    vals, vecs, _ = best
    order = np.argsort(vals)
    vals = vals[order] * scale
    vecs = vecs[:, order]
    # continuum normalization: sum |psi|^2 * cell = 1
    psi = (vecs / math.sqrt(grid.cell)).T
    for i in range(psi.shape[0]):  # deterministic sign convention
        jmax = int(np.argmax(np.abs(psi[i])))
        if psi[i, jmax] < 0:
            psi[i] = -psi[i]
    return EigenResult(energies=vals.copy(), wavefunctions=psi, grid=grid)


# ---------------------------------------------------------------------------
# field sweeps and the two-level reduction
# ---------------------------------------------------------------------------

@dataclass
class FieldSweep:
    """Qubit frequency versus field from repeated landscape solves."""

    fields: np.ndarray            # T
    omega_q: np.ndarray           # rad/s
    results: list[EigenResult]
    sweet_spot_index: int

    @property
    def sweet_spot_B(self) -> float:
        return float(self.fields[self.sweet_spot_index])


def spectrum_vs_field(sites: Sequence[PinningSite], x_window: tuple[float, float],
                      B_list, model: TunnelModel, scales: DerivedScales,
                      device: DeviceModel, n: float = 0.0,
                      grid_points: int = 1024, k: int = 3) -> FieldSweep:
    """Double-well qubit frequency omega_q(B) = (E1 - E0) / hbar.

    Requires exactly two pinning sites forming the double well inside
    x_window; the grid must clear every site by five widths. The sweet
    spot is reported as the argmin of omega_q over B_list.
    """
    if len(sites) != 2:
        raise InvalidParameterError("spectrum_vs_field expects exactly two sites")
    grid = Grid(x_min=x_window[0], x_max=x_window[1], nx=grid_points)
    for s in sites:
        if not (grid.x_min <= s.x_i - 5 * s.sigma_i
                and s.x_i + 5 * s.sigma_i <= grid.x_max):
            raise InvalidParameterError(
                f"x_window must cover site at {s.x_i} with a 5 sigma margin")
    x = grid.x
    fields = np.atleast_1d(np.asarray(B_list, dtype=float))
    results: list[EigenResult] = []
    omega = np.empty(fields.size)
    start = None
    for i, B in enumerate(fields):
        V = total_potential(x, 0.0, float(B), n, sites, scales, device)
        res = solve_schrodinger(grid, V, model, k=k, start=start)
        res.B = float(B)
        results.append(res)
        omega[i] = res.splitting / CONSTANTS.hbar
        start = res.wavefunctions.sum(axis=0)  # warm start the next field
    return FieldSweep(fields=fields, omega_q=omega, results=results,
                      sweet_spot_index=int(np.argmin(omega)))


@dataclass(frozen=True)
class TwoLevelModel:
    """Tunneling amplitude and asymmetry of the reduced double well."""

    Delta: float                      # J
    epsilon: Callable[[float], float]  # B (T) -> J, signed

    def omega_q(self, B: float) -> float:
        """Predicted splitting sqrt(4 Delta^2 + epsilon^2) / hbar (rad/s)."""
        return math.sqrt(4.0 * self.Delta**2 + self.epsilon(B) ** 2) / CONSTANTS.hbar


def two_level_reduction(result_pair: tuple[EigenResult, EigenResult],
                        asymmetry: Callable[[float], float]) -> TwoLevelModel:
    """Reduce solver output at two fields to the (Delta, epsilon) model.

    The member of the pair with the smaller splitting is taken as the
    degeneracy-field solve; Delta is half its splitting. The reduction is
    refused when the third level sits closer than three splittings above
    the qubit doublet.
    """
    if len(result_pair) != 2:
        raise InvalidParameterError("need results at exactly two fields")
    degenerate = min(result_pair, key=lambda r: r.splitting)
    if degenerate.energies.size < 3:
        raise InvalidParameterError(
            "need at least three levels to validate the reduction")
    split = degenerate.splitting
    third_gap = float(degenerate.energies[2] - degenerate.energies[1])
    if third_gap < 3.0 * split:
        raise ReductionInvalidError(
            f"third level only {third_gap / split:.2f} splittings above the "
            "doublet")
    return TwoLevelModel(Delta=split / 2.0, epsilon=asymmetry)


def double_well_asymmetry_model(x_bar: float, delta_LR: float,
                                scales: DerivedScales, device: DeviceModel,
                                n: float = 0.0,
                                B_ref: float | None = None):
    """Signed epsilon(B) for a double well, optionally re-zeroed at B_ref.

    Uses the exact well-bottom detuning of the bare landscape; when B_ref
    is given (for instance the solver's observed sweet spot) the offset is
    shifted so that epsilon(B_ref) = 0, which absorbs zero-point and
    pinning-tail contributions the bare landscape does not know about.
    """
    shift = 0.0
    if B_ref is not None:
        shift = well_detuning(x_bar, delta_LR, B_ref, scales, device, n)

    def epsilon(B: float) -> float:
        return well_detuning(x_bar, delta_LR, B, scales, device, n) - shift

    return epsilon
