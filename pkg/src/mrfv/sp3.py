"""Third-order simplified spherical-harmonics photoionization model.

The radiative transfer of ionizing photons in air is reduced to pairs of
screened elliptic equations per absorption group.  Each group solves

    lap(phi_n) - (lam_l p / kap_n)^2 phi_n = -(lam_l p / kap_n^2) q S

for n = 1, 2 with mixed (Robin-type) vacuum boundaries that couple the two
moments; the coupling is lagged and relaxed in a short fixed-point loop.
The isotropic photon density combines the moments, and the photoionization
rate sums the absorption groups.

Lengths are in cm and pressures in Torr throughout.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .assembly import (BCSpec, FluxScheme, OperatorSpec, Robin,
                       assemble_adapted, assemble_bc_rhs, assemble_rhs)
from .forest import Forest
from .linalg import SolveReport, SolverConfig, solve

log = logging.getLogger(__name__)

_R65 = math.sqrt(6.0 / 5.0)


@dataclass(frozen=True)
class Sp3Constants:
    """Moment-reduction constants; the defaults are the closed forms."""

    kappa: tuple[float, float] = ((3.0 - 2.0 * _R65) / 7.0,
                                  (3.0 + 2.0 * _R65) / 7.0)
    alpha: tuple[float, float] = ((5.0 / 96.0) * (34.0 - 11.0 * _R65),
                                  (5.0 / 96.0) * (34.0 + 11.0 * _R65))
    beta: tuple[float, float] = ((5.0 / 96.0) * (2.0 - _R65),
                                 (5.0 / 96.0) * (2.0 + _R65))
    gamma: tuple[float, float] = ((5.0 / 7.0) * (1.0 - 3.0 / _R65),
                                  (5.0 / 7.0) * (1.0 + 3.0 / _R65))


@dataclass(frozen=True)
class PhotoGroupParams:
    """Three-group exponential fit of air photoabsorption.

    ``absorption`` carries cm^-1 Torr^-1 amplitudes A_l and ``lam`` the
    matching absorption coefficients lam_l.
    """

    absorption: tuple[float, ...] = (0.0067, 0.0346, 0.3059)
    lam: tuple[float, ...] = (0.0447, 0.1121, 0.5994)

    def __post_init__(self) -> None:
        if len(self.absorption) != len(self.lam):
            raise ValueError("absorption and lam must have matching lengths")


@dataclass(frozen=True)
class PhysicalParams:
    """Gas state and emission model for the photoionization source.

    ``source`` maps an (n, dims) array of positions to the local emission
    density; when present it supplies the per-leaf source automatically.
    """

    p_o2: float = 150.0          # O2 partial pressure, Torr
    p_total: float = 760.0       # total pressure, Torr (quenching)
    p_quench: float = 30.0       # quenching pressure, Torr
    efficiency: float = 0.1      # photons per ionization event, xi
    light_speed: float = 2.99792458e10  # cm / s
    source: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if min(self.p_o2, self.p_total, self.p_quench) <= 0:
            raise ValueError("pressures must be positive")

    @property
    def quench_factor(self) -> float:
        return self.p_quench / (self.p_total + self.p_quench)

    def source_on_leaves(self, forest: Forest) -> np.ndarray:
        if self.source is None:
            raise ValueError("no source field configured")
        lm = forest.enumerate_leaves()
        pts = np.array([forest.grid.center(c) for c in lm.cells])
        return np.asarray(self.source(pts), dtype=float)


@dataclass
class GroupSolveResult:
    phi: tuple[np.ndarray, np.ndarray]
    reports: list[SolveReport] = field(default_factory=list)
    coupling_iterations: int = 0
    coupling_updates: list[float] = field(default_factory=list)


def sp3_solve_group(forest: Forest, source_values: np.ndarray, lam_p: float,
                    constants: Sp3Constants, physics: PhysicalParams,
                    solver: SolverConfig,
                    max_coupling_iter: int = 3,
                    coupling_tol: float = 1e-6) -> GroupSolveResult:
    """Solve the two coupled moments of one absorption group.

    ``source_values`` holds q S (ionization events per volume and time) on
    the leaves and ``lam_p`` the group's lam_l times gas pressure (cm^-1).
    The two screened systems exchange boundary data through the lagged Robin
    sources; each pass re-solves both moments and the loop stops when the
    relative l2 change of both fields drops below ``coupling_tol``.
    """
    lm = forest.enumerate_leaves()
    source_values = np.asarray(source_values, dtype=float)
    if source_values.shape != (len(lm),):
        raise ValueError("need one source value per leaf")
    scheme = FluxScheme()
    quench = physics.quench_factor
    phi = [np.zeros(len(lm)), np.zeros(len(lm))]
    result = GroupSolveResult(phi=(phi[0], phi[1]))

    # decoupled first pass: the partner term in the flux condition starts at
    # zero, only the self coefficient is active
    matrices = []
    sources = []
    for n in range(2):
        kap = constants.kappa[n]
        mu = lam_p / kap
        op = OperatorSpec.screened(mu * mu)
        bc0 = BCSpec.uniform(Robin(coefficient=lam_p * constants.alpha[n]),
                             forest.grid.dims)
        matrix, rhs_bc = assemble_adapted(forest, scheme, op, bc0)
        matrices.append((matrix, op))
        sources.append(-(lam_p / (kap * kap)) * quench * source_values)
        rhs = assemble_rhs(forest, sources[n], op, bc0, rhs_bc)
        x, report = solve(matrix, rhs, solver)
        phi[n] = x
        result.reports.append(report)

    # correction passes: both moments take the partner term from the previous
    # pass so the sweep order cannot matter
    for sweep in range(max_coupling_iter):
        prev = (phi[0], phi[1])
        updates = []
        for n in range(2):
            matrix, op = matrices[n]
            bc = _moment_bc(forest, lam_p, constants, n, prev[1 - n])
            rhs_bc = assemble_bc_rhs(forest, scheme, bc)
            rhs = assemble_rhs(forest, sources[n], op, bc, rhs_bc)
            x, report = solve(matrix, rhs, solver, x0=prev[n])
            base = np.linalg.norm(x)
            delta = np.linalg.norm(x - prev[n]) / base if base > 0 else 0.0
            updates.append(delta)
            phi[n] = x
            result.reports.append(report)
        result.coupling_iterations = sweep + 1
        result.coupling_updates.append(max(updates))
        log.debug("sp3 coupling sweep %d: rel update %.3e", sweep + 1, max(updates))
        if max(updates) < coupling_tol:
            break

    result.phi = (phi[0], phi[1])
    return result


def _moment_bc(forest: Forest, lam_p: float, constants: Sp3Constants, n: int,
               other_phi: np.ndarray) -> BCSpec:
    """Vacuum boundary for moment ``n`` with the partner moment lagged."""
    beta_other = constants.beta[1 - n]

    def coupled(point, row: int) -> float:
        return lam_p * beta_other * float(other_phi[row])

    face = Robin(coefficient=lam_p * constants.alpha[n], source=coupled)
    return BCSpec.uniform(face, forest.grid.dims)


def photon_isotropic(phi1: np.ndarray, phi2: np.ndarray,
                     constants: Sp3Constants) -> np.ndarray:
    """Isotropic photon distribution from the two moments."""
    g1, g2 = constants.gamma
    return (g2 * np.asarray(phi1) - g1 * np.asarray(phi2)) / (g2 - g1)


@dataclass
class PhotoSourceResult:
    rate: np.ndarray
    psi: list[np.ndarray]
    groups: list[GroupSolveResult]

    @property
    def min_rate(self) -> float:
        return float(self.rate.min())


def photo_source(forest: Forest, source_values: Sequence[float] | None,
                 physics: PhysicalParams, groups: PhotoGroupParams,
                 solver: SolverConfig,
                 constants: Sp3Constants | None = None,
                 max_coupling_iter: int = 3,
                 coupling_tol: float = 1e-6) -> PhotoSourceResult:
    """Photoionization rate on the leaves for a given ionization source.

    Runs the two-moment solve for every absorption group and accumulates

        S_ph = sum_l A_l xi p_O2 c Psi_l.

    ``source_values=None`` evaluates the configured source field at leaf
    centers instead.
    """
    constants = constants or Sp3Constants()
    lm = forest.enumerate_leaves()
    if source_values is None:
        src = physics.source_on_leaves(forest)
    else:
        src = np.asarray(source_values, dtype=float)
    rate = np.zeros(len(lm))
    psi_all: list[np.ndarray] = []
    results: list[GroupSolveResult] = []
    for a_l, lam_l in zip(groups.absorption, groups.lam):
        lam_p = lam_l * physics.p_o2
        res = sp3_solve_group(forest, src, lam_p, constants, physics, solver,
                              max_coupling_iter=max_coupling_iter,
                              coupling_tol=coupling_tol)
        psi = photon_isotropic(res.phi[0], res.phi[1], constants)
        psi_all.append(psi)
        rate += a_l * physics.efficiency * physics.p_o2 * physics.light_speed * psi
        results.append(res)
    return PhotoSourceResult(rate=rate, psi=psi_all, groups=results)


def gaussian_emitter(center: Sequence[float], sigma: float,
                     amplitude: float) -> Callable[[np.ndarray], np.ndarray]:
    """Convenience isotropic emission profile for demos and tests."""
    c = np.asarray(center, dtype=float)

    def source(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r2 = ((pts - c) ** 2).sum(axis=1)
        return amplitude * np.exp(-r2 / (sigma * sigma))

    return source
