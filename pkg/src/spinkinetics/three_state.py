"""Reactive three-level model: closed-form rates and their limits.

States "0", "1", "2": a two-level working pair (0, 1 split by omega0) plus a
third level reached by bath-induced transitions out of state 1 (splitting
omega_s between 1 and 2). Transverse coupling on the (1, 2) pair produces
population exchange w11/w22 and dephasing; closed forms for all five observable
rates are implemented here and serve as the analytic ground truth for the
assembled relaxation supermatrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bloch_redfield import (
    BathSpec,
    CouplingOperator,
    SpectralDensity,
    relaxation_supermatrix,
)
from .errors import ValidationError
from .liouville import (
    BasisLabel,
    OperatorMatrix,
    Superoperator,
    anticommutator_super,
    projector_dephasing_super,
)

THREE_STATE_BASIS = BasisLabel(("0", "1", "2"))


@dataclass(frozen=True)
class ThreeStateParams:
    """Model parameters.

    omega0, omega_s in rad/s; beta in s (math.inf for the irreversible limit).
    ``transverse`` is the spectrum of the x/y coupling on the (1, 2) pair.
    ``splitting`` optionally adds a fluctuating (0-1) level splitting, and
    ``isotropic`` adds a z coupling with the transverse spectrum, both of which
    contribute extra pure dephasing.
    """

    omega0: float
    omega_s: float
    beta: float
    transverse: SpectralDensity
    splitting: Optional[SpectralDensity] = None
    isotropic: bool = False

    def __post_init__(self):
        if not (self.omega_s > 0 and math.isfinite(self.omega_s)):
            raise ValidationError("omega_s must be positive and finite")
        if not math.isfinite(self.omega0):
            raise ValidationError("omega0 must be finite")
        if self.beta < 0:
            raise ValidationError("beta must be nonnegative")


@dataclass(frozen=True)
class ThreeStateRates:
    """Closed-form rates, all s^-1.

    w11/w22 exchange population between 1 and 2 (detailed balance
    w11 = exp(beta omega_s) w22), wn decays the 1-2 coherence, w01/w02 decay
    the 0-1 and 0-2 coherences. wbar01 and wbarn are the raw zero-frequency
    dephasing contributions of the splitting and z channels.
    """

    w11: float
    w22: float
    wn: float
    w01: float
    w02: float
    wbar01: float
    wbarn: float


def closed_form_rates(p: ThreeStateParams) -> ThreeStateRates:
    """Evaluate all five rates from the bath spectra.

    w11 = J(omega_s) / (1 + exp(-beta omega_s)) and w22 its detailed-balance
    partner; coherence rates are half the total population flux out of the
    states involved, plus a zero-frequency term for each diagonal fluctuation
    channel: +J(0)/2 on wn when isotropic, +J01(0)/2 on w01 when the splitting
    channel is present.
    """
    j_s = float(p.transverse.value(p.omega_s))
    x = p.beta * p.omega_s  # may be inf
    boltzmann = 0.0 if math.isinf(x) else math.exp(-x)
    w11 = j_s / (1.0 + boltzmann)
    w22 = w11 * boltzmann
    wbarn = float(p.transverse.value(0.0)) if p.isotropic else 0.0
    wbar01 = float(p.splitting.value(0.0)) if p.splitting is not None else 0.0
    return ThreeStateRates(
        w11=w11,
        w22=w22,
        wn=0.5 * j_s + 0.5 * wbarn,
        w01=0.5 * w11 + 0.5 * wbar01,
        w02=0.5 * w22,
        wbar01=wbar01,
        wbarn=wbarn,
    )


def _pair_operator(i: int, j: int) -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    m[i, j] = 1.0
    return m


def build_bath(p: ThreeStateParams):
    """System Hamiltonian and bath specification for the model.

    H = diag(omega0, +omega_s/2, -omega_s/2). The bath couples through
    half-weighted x/y operators on the (1, 2) pair (uncorrelated, equal
    spectra), optionally a z coupling of the same strength, and optionally the
    (0-1) splitting fluctuation (|0><0| - |1><1|)/2.
    """
    basis = THREE_STATE_BASIS
    h = OperatorMatrix(
        basis,
        np.diag([p.omega0, 0.5 * p.omega_s, -0.5 * p.omega_s]),
        hermitian=True,
    )
    sx = _pair_operator(1, 2) + _pair_operator(2, 1)
    sy = 1j * (_pair_operator(2, 1) - _pair_operator(1, 2))
    sz = _pair_operator(1, 1) - _pair_operator(2, 2)
    couplings = [
        CouplingOperator("x", OperatorMatrix(basis, 0.5 * sx, hermitian=True), 0),
        CouplingOperator("y", OperatorMatrix(basis, 0.5 * sy, hermitian=True), 1),
    ]
    densities = [p.transverse, p.transverse]
    if p.isotropic:
        couplings.append(
            CouplingOperator("z", OperatorMatrix(basis, 0.5 * sz, hermitian=True), 2)
        )
        densities.append(p.transverse)
    if p.splitting is not None:
        split = 0.5 * (_pair_operator(0, 0) - _pair_operator(1, 1))
        couplings.append(
            CouplingOperator(
                "01", OperatorMatrix(basis, split, hermitian=True), len(densities)
            )
        )
        densities.append(p.splitting)
    return h, BathSpec.uncorrelated(couplings, densities, beta=p.beta)


def _vec_index(i: int, j: int) -> int:
    return 3 * i + j


def assembled_rates(p: ThreeStateParams) -> ThreeStateRates:
    """Read the five rates off the assembled relaxation supermatrix."""
    h, bath = build_bath(p)
    r = relaxation_supermatrix(bath, h).matrix
    wbarn = float(p.transverse.value(0.0)) if p.isotropic else 0.0
    wbar01 = float(p.splitting.value(0.0)) if p.splitting is not None else 0.0
    return ThreeStateRates(
        w11=-r[_vec_index(1, 1), _vec_index(1, 1)].real,
        w22=-r[_vec_index(2, 2), _vec_index(2, 2)].real,
        wn=-r[_vec_index(1, 2), _vec_index(1, 2)].real,
        w01=-r[_vec_index(0, 1), _vec_index(0, 1)].real,
        w02=-r[_vec_index(0, 2), _vec_index(0, 2)].real,
        wbar01=wbar01,
        wbarn=wbarn,
    )


def projection_limit_super(
    w11_inf: float,
    splitting_rate: float = 0.0,
    w00_inf: float = 0.0,
) -> Superoperator:
    """Irreversible-limit generator in projector form.

    rho-dot = -(1/2) { w11_inf [P1, rho]_+ + splitting_rate D1(rho)
                       + w00_inf [P0, rho]_+ }

    with D1 the Lindblad-form dephasing across the P1 / (1 - P1) split. Valid
    when the 1 -> 2 transitions are one-way (large beta * omega_s); the
    returned superoperator is the generator itself (decay built in).
    """
    for name, rate in (("w11_inf", w11_inf), ("splitting_rate", splitting_rate), ("w00_inf", w00_inf)):
        if rate < 0 or not math.isfinite(rate):
            raise ValidationError(f"{name} must be finite and nonnegative")
    basis = THREE_STATE_BASIS
    p1 = OperatorMatrix(basis, _pair_operator(1, 1), hermitian=True)
    gen = (-0.5 * w11_inf) * anticommutator_super(p1)
    if splitting_rate:
        gen = gen + (-0.5 * splitting_rate) * projector_dephasing_super(p1)
    if w00_inf:
        p0 = OperatorMatrix(basis, _pair_operator(0, 0), hermitian=True)
        gen = gen + (-0.5 * w00_inf) * anticommutator_super(p0)
    return gen


def projection_limit_deviation(p: ThreeStateParams, beta_omega_s: float) -> float:
    """Distance between the assembled generator and its projector-form limit.

    The assembled supermatrix at beta = beta_omega_s / omega_s is compared
    against the projector form taken at the same J(omega_s), after removing
    the population-gain elements that feed the final state (the projector form
    describes pure loss). The norm of the difference decays like
    exp(-beta omega_s) * J(omega_s).
    """
    if p.isotropic or p.splitting is not None:
        raise ValidationError(
            "limit comparison is defined for the bare transverse bath only"
        )
    if beta_omega_s < 0:
        raise ValidationError("beta_omega_s must be nonnegative")
    beta = beta_omega_s / p.omega_s if not math.isinf(beta_omega_s) else math.inf
    h, bath = build_bath(replace(p, beta=beta))
    r = np.array(relaxation_supermatrix(bath, h).matrix)
    # population feed terms (1,1)<->(2,2); the projector form keeps only decay
    r[_vec_index(2, 2), _vec_index(1, 1)] = 0.0
    r[_vec_index(1, 1), _vec_index(2, 2)] = 0.0
    proj = projection_limit_super(w11_inf=float(p.transverse.value(p.omega_s)))
    return float(np.linalg.norm(r - proj.matrix, 2))
