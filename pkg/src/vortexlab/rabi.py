"""Quantum Rabi models for a two-level vortex mode coupled to its resonator.

Builds the Hamiltonian of a spin-1/2 coupled to a truncated harmonic
oscillator through h g (a^dag + a) sigma_x, with static field terms set by
two orthogonal contributions: a pseudo-field fixing the minimum qubit
frequency f_q0 and an applied field B' = B - B0 measured from the sweet
spot. Their orientation relative to the coupling axis is parametrized by
angles (theta, phi):

    pseudo-field direction   (cos theta, 0, sin theta)
    applied-field direction  (-sin phi sin theta, cos phi, sin phi cos theta)

(theta, phi) = (pi/2, pi/2) gives the asymmetric model (applied field along
the coupling axis); (pi/2, 0) is spectrally equivalent to the symmetric
model where the spin term is sigma_z sqrt(f_q0^2 + (gamma B')^2) / 2. The
admissible orientations are phi = 0 for any theta, or theta in {0, pi/2}
with phi in [0, pi); any other combination breaks the symmetry of the
spectrum under B' -> -B'.

Energies are handled in joules internally; all reported transitions are
plain frequencies in Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS
from .errors import AmbiguousLabelingError, DivergenceError, InvalidOrientationError, InvalidParameterError

_ORIENTATION_TOL = 1e-9


@dataclass(frozen=True)
class QrmParams:
    """Resonator, qubit and coupling parameters of one Rabi-model family.

    f_r:    resonator frequency (Hz)
    g:      coupling (Hz)
    gamma:  gyromagnetic ratio (Hz/T)
    B0:     sweet-spot field (T)
    f_q0:   qubit frequency at the sweet spot (Hz)
    theta:  pseudo-field polar angle (rad)
    phi:    applied-field azimuthal angle (rad)
    """

    f_r: float
    g: float
    gamma: float
    B0: float
    f_q0: float
    theta: float = math.pi / 2
    phi: float = math.pi / 2

    def __post_init__(self):
        if not (self.f_r > 0 and self.g >= 0 and self.gamma > 0 and self.f_q0 >= 0):
            raise InvalidParameterError(
                "require f_r > 0, g >= 0, gamma > 0, f_q0 >= 0")
        if not all(math.isfinite(v) for v in
                   (self.f_r, self.g, self.gamma, self.B0, self.f_q0,
                    self.theta, self.phi)):
            raise InvalidParameterError("parameters must be finite")
        if abs(self.phi) > _ORIENTATION_TOL:
            theta_ok = (abs(self.theta) < _ORIENTATION_TOL
                        or abs(self.theta - math.pi / 2) < _ORIENTATION_TOL)
            if not (theta_ok and 0.0 <= self.phi < math.pi):
                raise InvalidOrientationError(
                    f"(theta={self.theta}, phi={self.phi}) is not admissible: "
                    "need phi = 0, or theta in {0, pi/2} with phi in [0, pi)")

    @classmethod
    def asymmetric(cls, f_r, g, gamma, B0, f_q0) -> "QrmParams":
        """Applied field along the coupling axis; non-monotonic chi(B)."""
        return cls(f_r, g, gamma, B0, f_q0, theta=math.pi / 2, phi=math.pi / 2)

    @classmethod
    def symmetric(cls, f_r, g, gamma, B0, f_q0) -> "QrmParams":
        """Fully transverse coupling at every field."""
        return cls(f_r, g, gamma, B0, f_q0, theta=math.pi / 2, phi=0.0)


@dataclass(frozen=True)
class HilbertTruncation:
    """Oscillator truncation; total dimension is 2 (n_fock + 1)."""

    n_fock: int = 60

    def __post_init__(self):
        if self.n_fock < 2:
            raise InvalidParameterError(f"n_fock must be >= 2, got {self.n_fock}")

    @property
    def dim(self) -> int:
        return 2 * (self.n_fock + 1)


@dataclass
class LabeledSpectrum:
    """Eigen-decomposition with bare-state assignments.

    energies are ascending (J); labels[i] is the (branch, photon) pair of
    eigenstate i with branch 'g' or 'e'. The derived transitions are the
    lowest qubit-like transition f_q_dressed and the resonator transition
    conditioned on the qubit branch, all in Hz.
    """

    B: float
    energies: np.ndarray
    labels: list[tuple[str, int]]
    f_q_dressed: float
    f_r_g: float
    f_r_e: float

    @property
    def chi(self) -> float:
        """State-dependent dispersive shift f_r_e - f_r_g (Hz)."""
        return self.f_r_e - self.f_r_g


def _field_vector_hz(params: QrmParams, B: float) -> np.ndarray:
    """Total static spin field (f_q0 + applied) in frequency units (Hz)."""
    Bp = params.gamma * (B - params.B0)
    st, ct = math.sin(params.theta), math.cos(params.theta)
    sp, cp = math.sin(params.phi), math.cos(params.phi)
    pseudo = params.f_q0 * np.array([ct, 0.0, st])
    applied = Bp * np.array([-sp * st, cp, sp * ct])
    return pseudo + applied


def build_hamiltonian(params: QrmParams, B: float,
                      trunc: HilbertTruncation) -> np.ndarray:
    """Dense Hermitian Hamiltonian (J) in the Fock (x) spin product basis.

    Basis ordering is n * 2 + s with s = 0 the lower bare qubit state, so
    a = destroy (x) identity and the spin operators act on the fast index.
    """
    if not math.isfinite(B):
        raise InvalidParameterError(f"field must be finite, got {B}")
    nosc = trunc.n_fock + 1
    idx = np.arange(nosc)
    a = np.diag(np.sqrt(idx[1:].astype(float)), k=1)
    x_osc = a + a.T
    n_osc = np.diag(idx.astype(float))
    i_osc = np.eye(nosc)

    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
    sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    i2 = np.eye(2, dtype=complex)

    v = _field_vector_hz(params, B)
    h_field = 0.5 * (v[0] * sx + v[1] * sy + v[2] * sz)

    H = (params.f_r * np.kron(n_osc + 0.5 * i_osc, i2)
         + params.g * np.kron(x_osc, sx)
         + np.kron(i_osc, h_field))
    return CONSTANTS.h * H


def _bare_basis(params: QrmParams, B: float, trunc: HilbertTruncation):
    """Eigenbasis of the uncoupled Hamiltonian as labeled product states.

    Returns (basis matrix with one column per bare state, list of labels);
    columns are ordered by photon number then branch so that argmax ties
    resolve toward lower photon number.
    """
    v = _field_vector_hz(params, B)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
    sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    m = 0.5 * (v[0] * sx + v[1] * sy + v[2] * sz)
    evals, evecs = np.linalg.eigh(m)
    chi_g, chi_e = evecs[:, 0], evecs[:, 1]

    nosc = trunc.n_fock + 1
    dim = 2 * nosc
    basis = np.zeros((dim, dim), dtype=complex)
    labels: list[tuple[str, int]] = []
    col = 0
    for n in range(nosc):
        for branch, chi in (("g", chi_g), ("e", chi_e)):
            basis[2 * n: 2 * n + 2, col] = chi
            labels.append((branch, n))
            col += 1
    return basis, labels


def solve_qrm(params: QrmParams, B: float,
              trunc: HilbertTruncation) -> LabeledSpectrum:
    """Diagonalize and label the spectrum by overlap with bare states.

    Raises AmbiguousLabelingError (carrying the overlap matrix) when two
    eigenstates claim the same bare state or when one of the four states
    entering the reported transitions holds less than a 2/3 majority of a
    single bare state, both of which happen near resonance.
    """
    H = build_hamiltonian(params, B, trunc)
    energies, vecs = np.linalg.eigh(H)
    basis, bare_labels = _bare_basis(params, B, trunc)

    overlaps = np.abs(basis.conj().T @ vecs) ** 2  # bare x dressed
    assigned: dict[tuple[str, int], int] = {}
    labels: list[tuple[str, int]] = []
    for j in range(vecs.shape[1]):
        i = int(np.argmax(overlaps[:, j]))
        label = bare_labels[i]
        if label in assigned:
            raise AmbiguousLabelingError(
                f"eigenstates {assigned[label]} and {j} both claim bare state "
                f"{label} at B={B}", overlaps=overlaps)
        assigned[label] = j
        labels.append(label)

    # the transition states must carry a clear majority of one bare state,
    # otherwise the branch assignment is meaningless (near resonance)
    for key in (("g", 0), ("e", 0), ("g", 1), ("e", 1)):
        j = assigned[key]
        if overlaps[:, j].max() < 2.0 / 3.0:
            raise AmbiguousLabelingError(
                f"state assigned to {key} at B={B} is strongly mixed "
                f"(overlap {overlaps[:, j].max():.3f})", overlaps=overlaps)

    def level(branch: str, n: int) -> float:
        return float(energies[assigned[(branch, n)]])

    h = CONSTANTS.h
    f_q_dressed = (level("e", 0) - level("g", 0)) / h
    f_r_g = (level("g", 1) - level("g", 0)) / h
    f_r_e = (level("e", 1) - level("e", 0)) / h
    return LabeledSpectrum(B=B, energies=energies, labels=labels,
                           f_q_dressed=f_q_dressed, f_r_g=f_r_g, f_r_e=f_r_e)


def qubit_frequency(params: QrmParams, B: float) -> float:
    """Uncoupled hyperbola sqrt(f_q0^2 + (gamma (B - B0))^2) in Hz."""
    return math.hypot(params.f_q0, params.gamma * (B - params.B0))


def dispersive_shift(params: QrmParams, B: float,
                     trunc: HilbertTruncation | None = None,
                     convergence_hz: float = 1e3) -> float:
    """Dispersive shift chi = f_r_e - f_r_g (Hz) from exact diagonalization.

    With trunc=None the truncation starts at n_fock=60 and doubles until
    chi changes by less than convergence_hz. Propagates the labeling error
    near resonance instead of extrapolating.
    """
    if trunc is not None:
        return solve_qrm(params, B, trunc).chi
    n_fock = 60
    chi = solve_qrm(params, B, HilbertTruncation(n_fock)).chi
    while n_fock < 480:
        n_fock *= 2
        chi_next = solve_qrm(params, B, HilbertTruncation(n_fock)).chi
        if abs(chi_next - chi) < convergence_hz:
            return chi_next
        chi = chi_next
    return chi


def transverse_coupling(params: QrmParams, B: float) -> float:
    """Coupling projection onto the qubit transverse axes, g_perp (Hz)."""
    v = _field_vector_hz(params, B)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return params.g
    frac = math.sqrt(max(0.0, 1.0 - (v[0] / norm) ** 2))
    return params.g * frac


def chi_perturbative(params: QrmParams, B: float) -> float:
    """Second-order dispersive shift 2 g_perp^2 (1/(f_q - f_r) + 1/(f_q + f_r)).

    Cross-check for dispersive_shift, valid when |f_q - f_r| >> g_perp. The
    longitudinal coupling component displaces the oscillator identically
    for both qubit branches and drops out at this order.
    """
    f_q = qubit_frequency(params, B)
    if f_q == params.f_r:
        raise DivergenceError("perturbative shift diverges at f_q = f_r")
    g_perp = transverse_coupling(params, B)
    return 2.0 * g_perp**2 * (1.0 / (f_q - params.f_r) + 1.0 / (f_q + params.f_r))


def sweep_field(params: QrmParams, B_list, trunc: HilbertTruncation
                ) -> list[LabeledSpectrum | None]:
    """Independent solve_qrm at each field, order preserved.

    Points where labeling fails come back as None so that a sweep across a
    resonance yields gaps instead of aborting.
    """
    B_arr = np.atleast_1d(np.asarray(B_list, dtype=float))
    if B_arr.size == 0:
        raise InvalidParameterError("B_list must be non-empty")
    if not np.all(np.isfinite(B_arr)):
        raise InvalidParameterError("B_list must be finite")
    out: list[LabeledSpectrum | None] = []
    for B in B_arr:
        try:
            out.append(solve_qrm(params, float(B), trunc))
        except AmbiguousLabelingError:
            out.append(None)
    return out
