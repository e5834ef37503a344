"""Second-order relaxation supermatrix from couplings and bath spectra.

The relaxation generator is assembled as R = (R_a + R_b)/2 from the two
standard second-order contributions

    R_a rho = sum_{n n' r} J_{n'n}(w_r) [[C_{n'}^r, rho], L_n]
    R_b rho = sum_{n n' r} J_{n'n}(w_r) tanh(beta w_r / 2) [L_n, [C_{n'}^r, rho]_+]

where L_n are the Hermitian coupling operators, C_n^r their eigenoperator
components at the Bohr frequencies w_r of the system Hamiltonian, and
J_{nn'}(w) the symmetrised bath spectra. Detailed balance enters only through
the explicit tanh factor, so the spectra themselves are even in frequency.
Frequency (Lamb-type) shifts are dropped throughout: only the real relaxation
rates are produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .liouville import BasisLabel, OperatorMatrix, Superoperator, hermitian_defect

#: relative tolerance used to merge nearly degenerate Bohr frequencies
FREQUENCY_BIN_RTOL = 1e-9
#: components smaller than this (relative to the coupling) are discarded
COMPONENT_DROP_RTOL = 1e-12


# ---------------------------------------------------------------------------
# spectral densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lorentzian:
    """J(w) = 2 * amplitude * tau_c / (1 + (w tau_c)^2).

    ``amplitude`` is the mean-square coupling (rad^2/s^2), ``tau_c`` the
    correlation time (s); J carries units of s^-1.
    """

    amplitude: float
    tau_c: float

    def __post_init__(self):
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise ValidationError("Lorentzian amplitude must be finite and nonnegative")
        if not (self.tau_c > 0 and math.isfinite(self.tau_c)):
            raise ValidationError("Lorentzian tau_c must be positive")

    def value(self, omega):
        w = np.asarray(omega, dtype=float)
        out = 2.0 * self.amplitude * self.tau_c / (1.0 + (w * self.tau_c) ** 2)
        return float(out) if np.isscalar(omega) else out


@dataclass(frozen=True)
class WhiteNoise:
    """Frequency-independent spectrum J(w) = level (s^-1)."""

    level: float

    def __post_init__(self):
        if not (self.level >= 0 and math.isfinite(self.level)):
            raise ValidationError("white-noise level must be finite and nonnegative")

    def value(self, omega):
        if np.isscalar(omega):
            return float(self.level)
        return np.full(np.shape(omega), float(self.level))


class Tabulated:
    """Even spectrum interpolated linearly from samples on omega >= 0.

    Evaluation uses |omega|, which enforces J(w) = J(-w) by construction.
    Outside the tabulated range the end values are held constant.
    """

    def __init__(self, omega: Sequence[float], values: Sequence[float]):
        w = np.asarray(omega, dtype=float)
        j = np.asarray(values, dtype=float)
        if w.ndim != 1 or w.shape != j.shape or w.size < 2:
            raise ValidationError("tabulated spectrum needs matching 1-d grids")
        if w[0] < 0:
            raise ValidationError("tabulated grid must cover omega >= 0 only")
        if np.any(np.diff(w) <= 0):
            raise ValidationError("tabulated grid must be strictly increasing")
        if np.any(j < 0) or not np.all(np.isfinite(j)):
            raise ValidationError("tabulated spectrum values must be finite and nonnegative")
        self.omega = w.copy()
        self.values_grid = j.copy()
        self.omega.setflags(write=False)
        self.values_grid.setflags(write=False)

    def value(self, omega):
        out = np.interp(np.abs(omega), self.omega, self.values_grid)
        return float(out) if np.isscalar(omega) else out

    def __eq__(self, other):
        return (
            isinstance(other, Tabulated)
            and np.array_equal(self.omega, other.omega)
            and np.array_equal(self.values_grid, other.values_grid)
        )

    def __hash__(self):
        return hash((tuple(self.omega), tuple(self.values_grid)))


SpectralDensity = Union[Lorentzian, WhiteNoise, Tabulated]
_DENSITY_TYPES = (Lorentzian, WhiteNoise, Tabulated)

ZERO_DENSITY = WhiteNoise(0.0)


def thermal_factor(beta: float, omega: float) -> float:
    """tanh(beta * omega / 2) with the beta = +inf limit taken as sign(omega)."""
    if beta < 0:
        raise ValidationError("inverse temperature must be nonnegative")
    if math.isinf(beta):
        return float(np.sign(omega))
    return float(np.tanh(0.5 * beta * omega))


# ---------------------------------------------------------------------------
# couplings and bath specification
# ---------------------------------------------------------------------------

class CouplingOperator:
    """Hermitian system operator coupled to one bath channel."""

    def __init__(self, label: str, matrix: OperatorMatrix, spectral_index: int):
        if not matrix.is_hermitian():
            raise ValidationError(f"coupling operator {label!r} must be Hermitian")
        if spectral_index < 0:
            raise ValidationError("spectral_index must be nonnegative")
        self.label = str(label)
        self.matrix = matrix
        self.spectral_index = int(spectral_index)

    def __repr__(self):
        return f"CouplingOperator({self.label!r}, spectral_index={self.spectral_index})"


class BathSpec:
    """Couplings plus the (symmetric, real) matrix of their spectral densities.

    ``densities[i][j]`` is the cross-spectrum between channels i and j; it must
    be a full square grid covering every spectral index used by the couplings,
    and symmetric. All channels share one inverse temperature ``beta`` (s;
    ``math.inf`` selects the strictly irreversible limit).
    """

    def __init__(self, couplings, densities, beta: float):
        couplings = tuple(couplings)
        if not couplings:
            raise ValidationError("bath needs at least one coupling operator")
        basis = couplings[0].matrix.basis
        for c in couplings:
            if not isinstance(c, CouplingOperator):
                raise ValidationError("couplings must be CouplingOperator instances")
            if c.matrix.basis != basis:
                raise DimensionMismatchError("couplings live on different bases")
        grid = [tuple(row) for row in densities]
        m = len(grid)
        if any(len(row) != m for row in grid):
            raise ValidationError("density grid must be square")
        for row in grid:
            for d in row:
                if not isinstance(d, _DENSITY_TYPES):
                    raise ValidationError("density grid entries must be spectral densities")
        for i in range(m):
            for j in range(i):
                if grid[i][j] != grid[j][i]:
                    raise ValidationError("density grid must be symmetric")
        top = max(c.spectral_index for c in couplings)
        if top >= m:
            raise ValidationError(
                f"missing spectral density for channel pair: index {top} "
                f"outside {m}x{m} grid"
            )
        if beta < 0:
            raise ValidationError("inverse temperature must be nonnegative")
        self.couplings = couplings
        self.densities = tuple(grid)
        self.beta = float(beta)
        self.basis = basis

    @classmethod
    def uncorrelated(cls, couplings, densities, beta: float) -> "BathSpec":
        """Diagonal bath: coupling i gets ``densities[i]``, cross-spectra zero."""
        couplings = tuple(couplings)
        densities = tuple(densities)
        if len(couplings) != len(densities):
            raise ValidationError("one spectral density per coupling required")
        relabeled = [
            CouplingOperator(c.label, c.matrix, i) for i, c in enumerate(couplings)
        ]
        m = len(densities)
        grid = [
            [densities[i] if i == j else ZERO_DENSITY for j in range(m)]
            for i in range(m)
        ]
        return cls(relabeled, grid, beta)

    def density(self, i: int, j: int) -> SpectralDensity:
        """Cross-spectrum between couplings i and j (by coupling position)."""
        a = self.couplings[i].spectral_index
        b = self.couplings[j].spectral_index
        return self.densities[a][b]


# ---------------------------------------------------------------------------
# eigenoperator decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyComponent:
    """Slice of a coupling operator attached to one Bohr frequency (rad/s)."""

    omega: float
    matrix: OperatorMatrix


def _cluster_frequencies(freqs: np.ndarray, threshold: float) -> np.ndarray:
    """Representative frequency per cluster, exactly antisymmetric under negation."""
    order = np.argsort(freqs)
    sorted_f = freqs[order]
    reps = []
    start = 0
    for k in range(1, sorted_f.size + 1):
        if k == sorted_f.size or sorted_f[k] - sorted_f[k - 1] > threshold:
            reps.append(float(np.mean(sorted_f[start:k])))
            start = k
    reps = np.array(reps)
    # the multiset of Bohr frequencies is symmetric under negation; enforce the
    # pairing exactly so adjoint components land at exactly opposite frequencies
    n = reps.size
    for i in range(n // 2):
        f = 0.5 * (reps[n - 1 - i] - reps[i])
        reps[n - 1 - i] = f
        reps[i] = -f
    mid = n // 2
    if n % 2 == 1 and abs(reps[mid]) <= threshold:
        reps[mid] = 0.0
    return reps


def frequency_decompose(
    h: OperatorMatrix,
    coupling: Union[CouplingOperator, OperatorMatrix],
    tol: float = FREQUENCY_BIN_RTOL,
) -> list:
    """Split a coupling operator into eigenoperator components of H.

    Each component collects the matrix elements <j|L|j'> whose Bohr frequency
    nu_j - nu_j' falls into one bin (bins merge frequencies closer than
    ``tol * max|nu|``). Components sum back to the full operator; the adjoint
    of the component at +w is the component at -w.
    """
    lam = coupling.matrix if isinstance(coupling, CouplingOperator) else coupling
    if h.basis != lam.basis:
        raise DimensionMismatchError("Hamiltonian and coupling live on different bases")
    if not h.is_hermitian(1e-10):
        raise ValidationError("system Hamiltonian must be Hermitian")
    evals, vecs = np.linalg.eigh(0.5 * (h.entries + h.entries.conj().T))
    lam_eig = vecs.conj().T @ lam.entries @ vecs
    freq_matrix = evals[:, None] - evals[None, :]
    scale = float(np.abs(evals).max())
    threshold = tol * (scale if scale > 0 else 1.0)
    reps = _cluster_frequencies(freq_matrix.reshape(-1), threshold)

    drop_scale = float(np.abs(lam.entries).max())
    components = []
    for f in reps:
        mask = np.abs(freq_matrix - f) <= threshold + 1e-300
        block = np.where(mask, lam_eig, 0.0)
        comp = vecs @ block @ vecs.conj().T
        if drop_scale > 0 and np.abs(comp).max() <= COMPONENT_DROP_RTOL * drop_scale:
            continue
        components.append(FrequencyComponent(float(f), OperatorMatrix(h.basis, comp)))
    return components


# ---------------------------------------------------------------------------
# relaxation supermatrix assembly
# ---------------------------------------------------------------------------

def _double_commutator_matrix(comp: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Supermatrix of rho -> [[C, rho], L]."""
    eye = np.eye(lam.shape[0])
    return (
        np.kron(comp, lam.T)
        + np.kron(lam, comp.T)
        - np.kron(eye, (comp @ lam).T)
        - np.kron(lam @ comp, eye)
    )


def _commutator_anticommutator_matrix(comp: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Supermatrix of rho -> [L, [C, rho]_+]."""
    eye = np.eye(lam.shape[0])
    return (
        np.kron(lam @ comp, eye)
        + np.kron(lam, comp.T)
        - np.kron(comp, lam.T)
        - np.kron(eye, (comp @ lam).T)
    )


def _relaxation_parts(bath: BathSpec, h: OperatorMatrix):
    if bath.basis != h.basis:
        raise DimensionMismatchError("bath and Hamiltonian live on different bases")
    d2 = h.dim * h.dim
    part_a = np.zeros((d2, d2), dtype=complex)
    part_b = np.zeros((d2, d2), dtype=complex)
    comps = [frequency_decompose(h, c) for c in bath.couplings]
    for ip in range(len(bath.couplings)):
        for i, coupling in enumerate(bath.couplings):
            dens = bath.density(ip, i)
            lam = coupling.matrix.entries
            for comp in comps[ip]:
                j = float(dens.value(comp.omega))
                if j == 0.0:
                    continue
                part_a += j * _double_commutator_matrix(comp.matrix.entries, lam)
                th = thermal_factor(bath.beta, comp.omega)
                if th != 0.0:
                    part_b += (j * th) * _commutator_anticommutator_matrix(
                        comp.matrix.entries, lam
                    )
    return part_a, part_b


def double_commutator_part(bath: BathSpec, h: OperatorMatrix) -> Superoperator:
    """The temperature-independent half of the relaxation generator."""
    part_a, _ = _relaxation_parts(bath, h)
    return Superoperator(h.basis, part_a)


def thermal_part(bath: BathSpec, h: OperatorMatrix) -> Superoperator:
    """The detailed-balance half, weighted by tanh(beta w / 2)."""
    _, part_b = _relaxation_parts(bath, h)
    return Superoperator(h.basis, part_b)


def relaxation_supermatrix(bath: BathSpec, h: OperatorMatrix) -> Superoperator:
    """Full relaxation generator: half the sum of the two parts."""
    part_a, part_b = _relaxation_parts(bath, h)
    return Superoperator(h.basis, 0.5 * (part_a + part_b))


# ---------------------------------------------------------------------------
# perturbative-validity diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidityReport:
    """Dimensionless ||L|| * tau_c with pass/strong-pass flags."""

    ratio: float
    passes: bool
    strong_pass: bool

    PASS_THRESHOLD = 0.1
    STRONG_THRESHOLD = 0.01


def validity_check(superop: Superoperator, tau_c: float) -> ValidityReport:
    """Check that relaxation is slow on the bath correlation time scale.

    The second-order treatment behind all rates here requires outcomes per
    correlation time to be small: ratio <= 0.1 passes, <= 0.01 passes with
    margin.
    """
    if not (tau_c > 0 and math.isfinite(tau_c)):
        raise ValidationError("tau_c must be positive and finite")
    ratio = superop.norm() * tau_c
    headroom = 1.0 + 1e-9  # keep exact-boundary cases from flipping on rounding
    return ValidityReport(
        ratio=ratio,
        passes=ratio <= ValidityReport.PASS_THRESHOLD * headroom,
        strong_pass=ratio <= ValidityReport.STRONG_THRESHOLD * headroom,
    )
