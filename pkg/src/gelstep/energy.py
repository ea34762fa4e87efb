"""Free energy, external power, viscous dissipation, and the increment.

The time-incremental functional minimized at each step is

    Phi(y, psi) = FE(t, y, psi)
                + 1/(2 tau) ||psi - psi_prev||^2_(H^-1)
                + tau * Visc(t, y_prev, (y - y_prev)/tau, psi_prev)

over deformations y matching the identity on the Dirichlet set and
concentrations psi with the same total mass as psi_prev.  The free
energy is evaluated on the composed deformation v = vD(t, y(.)), so
differentiating with respect to nodal y values chains through the
distortion: writing J, H, T3 for the first three y-derivatives of vD
at y(x) and X, Y for the nodal gradient and Hessian of y,

    F = J X,    G_ijk = H_iab X_aj X_bk + J_ia Y_ajk,

and a perturbation dy moves F and G both through X, Y and through the
pointwise arguments of J, H.  `IncrementProblem.value_and_grad`
assembles the resulting nodal gradient exactly (up to the linear-solve
tolerance of the H^-1 term); the finite-difference oracle in the test
suite is the authority that it stays exact.

Gradient conventions: the y-gradient has Dirichlet rows zeroed (those
nodes are not variables); the psi-gradient is returned unprojected and
the optimizer removes its component along the quadrature weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensors
from .boundary import DirichletFamily, compose_deformation, external_power_fields
from .errors import InfiniteEnergy, MassMismatch
from .grid import Grid
from .hminus import NeumannLaplacian, solve_poisson_meanfree, stiffness_form
from .potentials import (
    PotentialParams,
    dpsi_total,
    g_eval,
    viscous_eval,
    wel_eval,
    why_eval,
    wpf_eval,
)

DET_FLOOR = 1e-8
MASS_TOL = 1e-10


@dataclass
class EnergyBreakdown:
    """Free energy split into its three densities.

    det_min is the smallest nodal determinant of the elastic distortion
    F/g(psi); a value at or below the floor marks the state infeasible
    and the energies are +inf.
    """

    elastic: float
    phase: float
    hyper: float
    total: float
    det_min: float
    finite: bool = True

    @classmethod
    def infinite(cls, det_min: float) -> "EnergyBreakdown":
        inf = math.inf
        return cls(inf, inf, inf, inf, det_min, finite=False)


def _free_energy_bundle(params, grid, bundle, psi, det_floor) -> EnergyBreakdown:
    g, _ = g_eval(psi, params)
    Fe = bundle.F / g
    det_fe = tensors.mat_det(Fe)
    det_min = float(det_fe.min())
    if det_min <= det_floor or not np.isfinite(det_fe).all():
        return EnergyBreakdown.infinite(det_min)
    wel_val, _ = wel_eval(Fe, params)
    wpf_val, _, _, _ = wpf_eval(psi, grid.grad(psi), bundle.F, params)
    why_val, _ = why_eval(bundle.G, params)
    el = float(grid.integrate(wel_val))
    pf = float(grid.integrate(wpf_val))
    hy = float(grid.integrate(why_val))
    total = el + pf + hy
    if not math.isfinite(total):
        return EnergyBreakdown.infinite(det_min)
    return EnergyBreakdown(el, pf, hy, total, det_min)


def free_energy(
    params: PotentialParams,
    grid: Grid,
    family: DirichletFamily,
    t: float,
    y: np.ndarray,
    psi: np.ndarray,
    det_floor: float = DET_FLOOR,
) -> EnergyBreakdown:
    """Total free energy of the composed state at time t.

    Returns the infinite marker instead of raising when the elastic
    determinant falls to det_floor or below, so line searches can use
    the value as a barrier.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        bundle = compose_deformation(family, t, grid, y)
        return _free_energy_bundle(params, grid, bundle, psi, det_floor)


def dt_free_energy(
    params: PotentialParams,
    grid: Grid,
    family: DirichletFamily,
    t: float,
    y: np.ndarray,
    psi: np.ndarray,
    det_floor: float = DET_FLOOR,
) -> float:
    """Partial time derivative of the free energy at frozen (y, psi).

    This is the external power supplied through the moving Dirichlet
    distortion: all three densities are differentiated through the
    explicit t-dependence of vD only.
    """
    bundle = compose_deformation(family, t, grid, y)
    g, _ = g_eval(psi, params)
    Fe = bundle.F / g
    det_fe = tensors.mat_det(Fe)
    det_min = float(det_fe.min())
    if det_min <= det_floor:
        raise InfiniteEnergy(
            f"cannot differentiate: elastic determinant {det_min:.3e} "
            f"at or below floor {det_floor:.1e}"
        )
    dtF, dtG = external_power_fields(family, t, grid, y)
    _, Sel = wel_eval(Fe, params)
    _, _, _, d_F = wpf_eval(psi, grid.grad(psi), bundle.F, params)
    _, Q = why_eval(bundle.G, params)
    dens = (
        tensors.ddot(Sel, dtF) / g
        + tensors.ddot(d_F, dtF)
        + tensors.triple_dot(Q, dtG)
    )
    return float(grid.integrate(dens))


def viscous_dissipation(
    params: PotentialParams,
    grid: Grid,
    F_prev: np.ndarray,
    F_rate: np.ndarray,
    psi: np.ndarray,
) -> float:
    """Integrated viscous dissipation potential for a given rate field."""
    value, _ = viscous_eval(F_prev, F_rate, psi, params)
    return float(grid.integrate(value))


def external_power_integral(
    params: PotentialParams,
    grid: Grid,
    family: DirichletFamily,
    t0: float,
    t1: float,
    y: np.ndarray,
    psi: np.ndarray,
) -> float:
    """External power over [t0, t1] at a frozen state.

    Five-point Gauss quadrature of the partial time derivative of the
    free energy; exact for the polynomial-in-t families and far below
    the energy ledger's slack for the trigonometric ramps.
    """
    nodes, weights = np.polynomial.legendre.leggauss(5)
    mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    total = 0.0
    for x, w in zip(nodes, weights):
        total += w * dt_free_energy(params, grid, family, mid + half * x, y, psi)
    return half * total


class IncrementProblem:
    """One minimizing-movement step with all previous-state data frozen.

    Precomputes everything that depends only on (t, tau, y_prev,
    psi_prev) so repeated functional and gradient evaluations inside
    the optimizer stay cheap.  The viscous rate argument is either

      composed: F_rate = grad_y vD(t, y_prev) . grad(y - y_prev) / tau
      raw:      F_rate = (F(t, y) - F(t, y_prev)) / tau

    both evaluated against F_prev = F(t, y_prev).
    """

    def __init__(
        self,
        params: PotentialParams,
        grid: Grid,
        family: DirichletFamily,
        lap: NeumannLaplacian,
        t: float,
        tau: float,
        y_prev: np.ndarray,
        psi_prev: np.ndarray,
        viscous_rate: str = "composed",
        det_floor: float = DET_FLOOR,
    ):
        if viscous_rate not in ("composed", "raw"):
            raise ValueError(f"viscous_rate must be composed or raw, got {viscous_rate!r}")
        if tau <= 0.0:
            raise ValueError(f"time step must be positive, got {tau}")
        self.params = params
        self.grid = grid
        self.family = family
        self.lap = lap
        self.t = float(t)
        self.tau = float(tau)
        self.y_prev = y_prev
        self.psi_prev = psi_prev
        self.viscous_rate = viscous_rate
        self.det_floor = det_floor
        self.mass0 = float(grid.integrate(psi_prev))
        self.X_prev = grid.grad(y_prev)
        self.J_prev = family.jac(self.t, y_prev)
        self.F_prev = np.einsum("ia...,aj...->ij...", self.J_prev, self.X_prev)
        self.warm_key = "increment"

    def _check_mass(self, psi: np.ndarray) -> None:
        drift = float(self.grid.integrate(psi)) - self.mass0
        if abs(drift) > MASS_TOL:
            raise MassMismatch(
                f"solvent mass drifted by {drift:.3e} (allowed {MASS_TOL:.1e})"
            )

    def _f_rate(self, bundle) -> np.ndarray:
        if self.viscous_rate == "composed":
            dX = (bundle.X - self.X_prev) / self.tau
            return np.einsum("ia...,aj...->ij...", self.J_prev, dX)
        return (bundle.F - self.F_prev) / self.tau

    def _solve_prox(self, psi: np.ndarray) -> np.ndarray:
        return solve_poisson_meanfree(self.lap, psi - self.psi_prev, warm_key=self.warm_key)

    def value(self, y: np.ndarray, psi: np.ndarray) -> float:
        """Incremental functional value; +inf past the determinant barrier."""
        self._check_mass(psi)
        with np.errstate(over="ignore", invalid="ignore"):
            bundle = compose_deformation(self.family, self.t, self.grid, y)
            fe = _free_energy_bundle(self.params, self.grid, bundle, psi, self.det_floor)
            if not fe.finite:
                return math.inf
            u = self._solve_prox(psi)
            dist = stiffness_form(self.lap, u, u) / (2.0 * self.tau)
            visc = viscous_dissipation(
                self.params, self.grid, self.F_prev, self._f_rate(bundle), self.psi_prev
            )
            total = fe.total + dist + self.tau * visc
        return total if math.isfinite(total) else math.inf

    def value_and_grad(
        self, y: np.ndarray, psi: np.ndarray
    ) -> tuple[float, np.ndarray, np.ndarray]:
        """Functional value and its exact nodal gradient.

        Raises InfiniteEnergy on an infeasible state; the optimizer only
        requests gradients at points already accepted by `value`.
        """
        self._check_mass(psi)
        grid, params = self.grid, self.params
        d = grid.d
        bundle = compose_deformation(self.family, self.t, grid, y)
        g, gp = g_eval(psi, params)
        Fe = bundle.F / g
        det_fe = tensors.mat_det(Fe)
        det_min = float(det_fe.min())
        if det_min <= self.det_floor:
            raise InfiniteEnergy(
                f"gradient requested at infeasible state: determinant "
                f"{det_min:.3e} at or below floor {self.det_floor:.1e}"
            )

        grad_psi_field = grid.grad(psi)
        wel_val, Sel = wel_eval(Fe, params)
        wpf_val, d_psi_dw, q_flux, d_F = wpf_eval(psi, grad_psi_field, bundle.F, params)
        why_val, Q = why_eval(bundle.G, params)
        fe_total = float(grid.integrate(wel_val + wpf_val + why_val))

        u = self._solve_prox(psi)
        dist = stiffness_form(self.lap, u, u) / (2.0 * self.tau)

        F_rate = self._f_rate(bundle)
        v_val, P_visc = viscous_eval(self.F_prev, F_rate, self.psi_prev, params)
        visc = float(grid.integrate(v_val))
        total = fe_total + dist + self.tau * visc

        # ---- gradient with respect to nodal y ----
        X, Y, J, H, T3 = bundle.X, bundle.Y, bundle.J, bundle.H, bundle.T3
        P_F = Sel / g + d_F
        if self.viscous_rate == "raw":
            # tau * V(.., (F - F_prev)/tau, ..) differentiates to P_visc in F
            P_F = P_F + P_visc

        dX = np.einsum("ia...,ij...->aj...", J, P_F)
        dX += np.einsum("ijk...,iab...,bk...->aj...", Q, H, X)
        dX += np.einsum("ijk...,iab...,aj...->bk...", Q, H, X)
        if self.viscous_rate == "composed":
            dX += np.einsum("ia...,ij...->aj...", self.J_prev, P_visc)
        dY = np.einsum("ia...,ijk...->ajk...", J, Q)
        point = np.einsum("ij...,aj...,iam...->m...", P_F, X, H)
        point += np.einsum("ijk...,aj...,bk...,iabm...->m...", Q, X, X, T3)
        point += np.einsum("ijk...,ajk...,iam...->m...", Q, Y, H)

        W = grid.weights
        grad_y = W * point
        for j in range(d):
            grad_y += grid.apply_dt(W * dX[:, j], j)
            for k in range(d):
                grad_y += grid.apply_dt(grid.apply_dt(W * dY[:, j, k], k), j)
        grad_y = grid.zero_dirichlet(grad_y)

        # ---- gradient with respect to nodal psi ----
        dpsi_point = -tensors.ddot(Sel, Fe) * gp / g + d_psi_dw
        grad_psi = W * (dpsi_point + u / self.tau)
        for j in range(d):
            grad_psi += grid.apply_dt(W * q_flux[j], j)

        return total, grad_y, grad_psi

    def components(self, y: np.ndarray, psi: np.ndarray):
        """Ledger quantities at a state: breakdown, proximal half-square,
        viscous dissipation, and the H^-1 potential of the increment."""
        bundle = compose_deformation(self.family, self.t, self.grid, y)
        fe = _free_energy_bundle(self.params, self.grid, bundle, psi, self.det_floor)
        u = self._solve_prox(psi)
        dist = stiffness_form(self.lap, u, u) / (2.0 * self.tau)
        visc = viscous_dissipation(
            self.params, self.grid, self.F_prev, self._f_rate(bundle), self.psi_prev
        )
        return fe, dist, visc, u


def incremental_functional(
    params: PotentialParams,
    grid: Grid,
    family: DirichletFamily,
    lap: NeumannLaplacian,
    t: float,
    tau: float,
    y_prev: np.ndarray,
    psi_prev: np.ndarray,
    y: np.ndarray,
    psi: np.ndarray,
    viscous_rate: str = "composed",
) -> float:
    """Value of the time-incremental functional (convenience wrapper)."""
    problem = IncrementProblem(
        params, grid, family, lap, t, tau, y_prev, psi_prev, viscous_rate
    )
    return problem.value(y, psi)


def incremental_gradient(
    params: PotentialParams,
    grid: Grid,
    family: DirichletFamily,
    lap: NeumannLaplacian,
    t: float,
    tau: float,
    y_prev: np.ndarray,
    psi_prev: np.ndarray,
    y: np.ndarray,
    psi: np.ndarray,
    viscous_rate: str = "composed",
) -> tuple[np.ndarray, np.ndarray]:
    """Exact nodal gradient of the incremental functional."""
    problem = IncrementProblem(
        params, grid, family, lap, t, tau, y_prev, psi_prev, viscous_rate
    )
    _, grad_y, grad_psi = problem.value_and_grad(y, psi)
    return grad_y, grad_psi
