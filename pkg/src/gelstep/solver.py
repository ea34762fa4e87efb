"""Time-incremental minimization: per-step descent and the trajectory march.

Each step minimizes the incremental functional over (y, psi) subject to
the linear constraints y|_Gamma_D = id and integral(psi) = integral(psi0).
The minimizer is a limited-memory quasi-Newton descent (two-loop L-BFGS
recursion) with Armijo backtracking on the joint variable:

* gradients and search directions are projected (Dirichlet rows of y
  zeroed, the quadrature-weight component of psi removed),
* every trial point is retracted exactly onto the constraint set before
  evaluation, so mass and boundary values never drift,
* +inf functional values act as a barrier: the line search backtracks
  away from states whose elastic determinant hits the floor,
* the initial iterate is the previous state, which makes the accepted
  step satisfy F(new) <= F(prev) by construction.  That descent
  inequality is what the energy-dissipation ledger consumes, so it is
  asserted, not assumed.

Near machine precision the Armijo model becomes noise; when the
predicted decrease falls below 64 eps (1 + |F|) a non-increasing trial
is accepted, and a fully stalled search at an already near-stationary
point counts as converged rather than an error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .boundary import DirichletFamily, compose_deformation
from .energy import (
    DET_FLOOR,
    EnergyBreakdown,
    IncrementProblem,
    external_power_integral,
    free_energy,
)
from .errors import (
    GelstepError,
    InfiniteEnergy,
    IterationBudgetExceeded,
    LineSearchFailure,
    ValidationError,
)
from .grid import Grid
from .hminus import NeumannLaplacian, solve_poisson_meanfree
from .potentials import PotentialParams, dpsi_total, g_eval
from . import tensors

_EPS = float(np.finfo(float).eps)
_MIN_STEP = 1e-16
_NOISE_FACTOR = 64.0


@dataclass
class SolverConfig:
    """Per-step optimizer settings."""

    grad_tol: float = 1e-8
    max_iters: int = 1200
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    memory: int = 10
    det_floor: float = DET_FLOOR

    def __post_init__(self):
        if not 0.0 < self.armijo_c < 0.5:
            raise ValidationError(
                f"armijo_c must lie in (0, 0.5), got {self.armijo_c}"
            )
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValidationError(
                f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}"
            )
        if self.grad_tol <= 0.0:
            raise ValidationError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.max_iters < 1 or self.memory < 1:
            raise ValidationError("max_iters and memory must be at least 1")
        if self.det_floor <= 0.0:
            raise ValidationError(f"det_floor must be positive, got {self.det_floor}")


@dataclass
class NodalState:
    """One time slice of the discrete evolution."""

    t: float
    y: np.ndarray
    psi: np.ndarray
    grid: Grid
    breakdown: EnergyBreakdown | None = None
    mu: np.ndarray | None = None
    lam: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def mass(self) -> float:
        return float(self.grid.integrate(self.psi))

    def validate(self, mass0: float | None = None, mass_tol: float = 1e-10) -> None:
        """Check the state invariants: exact identity on the Dirichlet
        set, positive determinant of grad y, and bounded mass drift."""
        grid = self.grid
        mask = grid.dirichlet_mask
        if not np.array_equal(self.y[:, mask], grid.coords[:, mask]):
            raise ValidationError("state violates y = id on the Dirichlet set")
        det = tensors.mat_det(grid.grad(self.y))
        if float(det.min()) <= 0.0:
            raise ValidationError(
                f"state has nonpositive det(grad y), min {float(det.min()):.3e}"
            )
        if mass0 is not None and abs(self.mass - mass0) > mass_tol:
            raise ValidationError(
                f"state mass {self.mass:.12e} drifted from {mass0:.12e} "
                f"beyond {mass_tol:.1e}"
            )


@dataclass
class StepRecord:
    """Energy-ledger row for one step (m = 0 is the initial state)."""

    m: int
    t: float
    f_el: float
    f_pf: float
    f_hy: float
    total: float
    hminus_dist: float
    viscous: float
    dt_F_integral: float
    edi_lhs: float
    edi_rhs: float
    det_min: float
    mass: float
    iterations: int = 0
    grad_norm: float = 0.0
    budget_exceeded: bool = False


@dataclass
class Trajectory:
    """Completed discrete evolution with interpolant accessors.

    States are indexed m = 0..M at times t_m = m tau.  The accessors
    realize the three standard interpolants: right- and left-continuous
    piecewise constants and the piecewise-linear one.
    """

    grid: Grid
    family: DirichletFamily
    params: PotentialParams
    tau: float
    t_final: float
    states: list[NodalState]
    records: list[StepRecord]
    solver_config: SolverConfig
    viscous_rate: str = "composed"

    @property
    def num_steps(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def _clamp(self, t: float) -> float:
        if t < -1e-12 or t > self.t_final + 1e-12:
            raise ValueError(f"time {t} outside [0, {self.t_final}]")
        return min(max(t, 0.0), self.t_final)

    def right_constant(self, t: float) -> NodalState:
        """State m for t in (t_{m-1}, t_m]; state 0 at t = 0."""
        t = self._clamp(t)
        m = int(math.ceil(t / self.tau - 1e-12))
        return self.states[max(0, min(m, self.num_steps))]

    def left_constant(self, t: float) -> NodalState:
        """State m-1 for t in [t_{m-1}, t_m); state M at t = T."""
        t = self._clamp(t)
        m = int(math.floor(t / self.tau + 1e-12))
        return self.states[max(0, min(m, self.num_steps))]

    def linear(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Piecewise-linear interpolant of (y, psi) at time t."""
        t = self._clamp(t)
        m = int(math.ceil(t / self.tau - 1e-12))
        m = max(1, min(m, self.num_steps))
        lo, hi = self.states[m - 1], self.states[m]
        theta = (t - lo.t) / self.tau
        theta = min(max(theta, 0.0), 1.0)
        y = (1.0 - theta) * lo.y + theta * hi.y
        psi = (1.0 - theta) * lo.psi + theta * hi.psi
        return y, psi


def _flat_projector(grid: Grid):
    """Build the projector onto the feasible tangent space for the flat
    (y, psi) vector, plus the exact retraction onto the constraint set."""
    d, shape = grid.d, grid.shape
    ny = d * grid.num_nodes
    mask = grid.dirichlet_mask
    w = grid.weights
    wsq = float((w * w).sum())
    pinned = grid.coords[:, mask]

    def project(vec: np.ndarray) -> np.ndarray:
        out = vec.copy()
        vy = out[:ny].reshape((d,) + shape)
        vy[:, mask] = 0.0
        vp = out[ny:].reshape(shape)
        vp -= ((vp * w).sum() / wsq) * w
        return out

    def retract(vec: np.ndarray, mass0: float) -> tuple[np.ndarray, np.ndarray]:
        y = vec[:ny].reshape((d,) + shape).copy()
        y[:, mask] = pinned
        psi = vec[ny:].reshape(shape).copy()
        psi += (mass0 - float(grid.integrate(psi))) / grid.volume
        return y, psi

    def pack(y: np.ndarray, psi: np.ndarray) -> np.ndarray:
        return np.concatenate([y.ravel(), psi.ravel()])

    return project, retract, pack


class _StepPreconditioner:
    """Frozen quadratic surrogate of the step Hessian, factorized once.

    The y block is a scalar elliptic operator shared by all vector
    components: a second-order part weighted by the local elastic plus
    viscous stiffness and a fourth-order part weighted by the (floored)
    second-gradient stiffness, restricted to non-Dirichlet nodes.  The
    psi block combines the floored double-well curvature, the proximal
    low-mode scale 1/(tau lambda_1), and the Korteweg operator.  It
    only shapes search directions, so the crude coefficient floors cost
    nothing but iterations.
    """

    def __init__(self, problem: IncrementProblem):
        grid, params = problem.grid, problem.params
        bundle = compose_deformation(
            problem.family, problem.t, grid, problem.y_prev
        )
        g, _ = g_eval(problem.psi_prev, params)
        Fe = bundle.F / g
        det = tensors.mat_det(Fe)
        Fe_inv, _ = tensors.mat_inv_det(Fe)
        cF = (
            params.alpha * tensors.frob(Fe, 2) ** (params.p - 2.0) / g**2
            + params.c_det
            * params.q
            * det ** (-params.q)
            * tensors.frob(Fe_inv, 2) ** 2
            / g**2
            + 4.0 * params.eta_visc * tensors.frob(bundle.F, 2) ** 2 / problem.tau
        )
        nG = tensors.frob(bundle.G, 3)
        cG = params.gamma * (nG**2 + 1e-4) ** (0.5 * (params.beta - 2.0))

        w = grid.weights.reshape(-1)
        D = [grid.sparse_derivative(j) for j in range(grid.d)]
        WcF = sparse.diags(w * cF.reshape(-1))
        WcG = sparse.diags(w * cG.reshape(-1))
        Ky = None
        for j in range(grid.d):
            term = D[j].T @ WcF @ D[j]
            Ky = term if Ky is None else Ky + term
            for k in range(grid.d):
                DD = D[k] @ D[j]
                Ky = Ky + DD.T @ WcG @ DD
        free = ~grid.dirichlet_mask.reshape(-1)
        self.free = free
        Kff = Ky.tocsr()[free][:, free].tocsc()
        Kff = Kff + 1e-12 * sparse.identity(Kff.shape[0], format="csc")
        self.lu_y = spla.splu(Kff)

        lam1 = 2.0 * (1.0 - np.cos(np.pi * grid.h)) / grid.h**2
        c_psi = params.a_dw * np.maximum(
            3.0 * problem.psi_prev**2 - 1.0, 0.3
        ) + 1.0 / (problem.tau * lam1)
        Mp = sparse.diags(w * c_psi.reshape(-1))
        Wd = sparse.diags(w)
        for j in range(grid.d):
            Mp = Mp + params.b_kw * (D[j].T @ Wd @ D[j])
        self.lu_psi = spla.splu(Mp.tocsc())

        self.num_nodes = grid.num_nodes
        self.ny = grid.d * grid.num_nodes
        self.d = grid.d

    def apply(self, vec: np.ndarray) -> np.ndarray:
        N = self.num_nodes
        out = np.empty_like(vec)
        for a in range(self.d):
            comp = vec[a * N : (a + 1) * N]
            sol = np.zeros(N)
            sol[self.free] = self.lu_y.solve(comp[self.free])
            out[a * N : (a + 1) * N] = sol
        out[self.ny :] = self.lu_psi.solve(vec[self.ny :])
        return out


def _two_loop(g: np.ndarray, pairs, h0_apply):
    """L-BFGS two-loop recursion with an explicit initial matrix; returns -H g."""
    q = g.copy()
    alphas = []
    for s, yv, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * yv
    r = h0_apply(q)
    for (s, yv, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(yv @ r)
        r += (a - b) * s
    return -r


def _eval(problem: IncrementProblem, y: np.ndarray, psi: np.ndarray):
    """Fused value/gradient evaluation with the barrier mapped to +inf."""
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            f, gy, gpsi = problem.value_and_grad(y, psi)
    except InfiniteEnergy:
        return math.inf, None, None
    if not math.isfinite(f):
        return math.inf, None, None
    return f, gy, gpsi


def _descend(problem: IncrementProblem, cfg: SolverConfig, freeze_psi: bool = False):
    """Run the projected quasi-Newton descent from the previous state.

    Returns (y, psi, f, info).  Raises LineSearchFailure only when the
    search stalls at a point that is clearly not stationary; exhausting
    the iteration budget returns the best iterate with a warning flag
    as long as the descent guarantee holds.  With `freeze_psi` the
    concentration block is projected out entirely, so the descent
    minimizes over the deformation alone.
    """
    grid = problem.grid
    project, retract, pack = _flat_projector(grid)
    if freeze_psi:
        ny = grid.d * grid.num_nodes
        base_project = project

        def project(vec: np.ndarray) -> np.ndarray:
            out = base_project(vec)
            out[ny:] = 0.0
            return out
    mass0 = problem.mass0

    y, psi = retract(pack(problem.y_prev, problem.psi_prev), mass0)
    z = pack(y, psi)
    f, gy, gpsi = _eval(problem, y, psi)
    if not math.isfinite(f):
        raise InfiniteEnergy("previous state is infeasible at the new time level")
    f0 = f
    g = project(pack(gy, gpsi))
    precond = None
    pairs: list[tuple[np.ndarray, np.ndarray, float]] = []
    evals = 1
    converged = False
    stalled = False
    it = 0

    while it < cfg.max_iters:
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.grad_tol * (1.0 + abs(f)):
            converged = True
            break
        if precond is None:
            precond = _StepPreconditioner(problem)

        direction = project(_two_loop(g, pairs, precond.apply))
        slope = float(g @ direction)
        if not math.isfinite(slope) or slope >= 0.0:
            pairs.clear()
            direction = project(-precond.apply(g))
            slope = float(g @ direction)
            if not math.isfinite(slope) or slope >= 0.0:
                direction = -g
                slope = -gnorm * gnorm

        step = 1.0
        noise_floor = _NOISE_FACTOR * _EPS * (1.0 + abs(f))
        accepted = False
        while step >= _MIN_STEP:
            y_t, psi_t = retract(z + step * direction, mass0)
            f_t, gy_t, gpsi_t = _eval(problem, y_t, psi_t)
            evals += 1
            if f_t <= f + cfg.armijo_c * step * slope:
                accepted = True
                break
            if abs(step * slope) <= noise_floor and f_t <= f:
                accepted = True
                break
            step *= cfg.backtrack_factor

        if not accepted:
            if gnorm <= 10.0 * cfg.grad_tol * (1.0 + abs(f)):
                # noise-limited stationarity: nothing left to gain
                converged = True
                stalled = True
                break
            raise LineSearchFailure(
                f"no admissible step above {_MIN_STEP:.0e} at projected "
                f"gradient norm {gnorm:.3e} (tol {cfg.grad_tol * (1 + abs(f)):.3e})"
            )

        z_new = pack(y_t, psi_t)
        g_new = project(pack(gy_t, gpsi_t))

        s = z_new - z
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            pairs.append((s, yv, 1.0 / sy))
            if len(pairs) > cfg.memory:
                pairs.pop(0)

        z, f, g = z_new, f_t, g_new
        y, psi = y_t, psi_t
        it += 1

    gnorm = float(np.linalg.norm(g))
    info = {
        "iterations": it,
        "f_evals": evals,
        "grad_norm": gnorm,
        "objective": f,
        "converged": converged,
        "stalled": stalled,
        "budget_exceeded": not converged,
    }
    if not converged:
        if f <= f0 + 1e-12:
            warnings.warn(
                f"iteration budget {cfg.max_iters} exhausted with projected "
                f"gradient norm {gnorm:.3e}; returning best descent iterate",
                RuntimeWarning,
                stacklevel=2,
            )
        else:
            raise IterationBudgetExceeded(
                f"budget {cfg.max_iters} exhausted without descent: "
                f"F = {f:.12e} vs start {f0:.12e}"
            )
    if f > f0 + 1e-12:
        raise IterationBudgetExceeded(
            f"descent guarantee violated: F(new) = {f:.12e} > F(prev) = {f0:.12e}"
        )
    return y, psi, f, info


def minimize_increment(
    prev: NodalState,
    t_m: float,
    tau: float,
    family: DirichletFamily,
    params: PotentialParams,
    cfg: SolverConfig | None = None,
    lap: NeumannLaplacian | None = None,
    viscous_rate: str = "composed",
) -> NodalState:
    """Solve one minimizing-movement step starting from `prev`.

    The returned state satisfies the projected first-order condition
    to grad_tol, the descent inequality against the previous state, and
    the NodalState invariants.
    """
    cfg = cfg or SolverConfig()
    grid = prev.grid
    lap = lap or NeumannLaplacian(grid)
    problem = IncrementProblem(
        params,
        grid,
        family,
        lap,
        t_m,
        tau,
        prev.y,
        prev.psi,
        viscous_rate=viscous_rate,
        det_floor=cfg.det_floor,
    )
    y, psi, f, info = _descend(problem, cfg)
    breakdown = free_energy(params, grid, family, t_m, y, psi, cfg.det_floor)
    state = NodalState(
        t=float(t_m), y=y, psi=psi, grid=grid, breakdown=breakdown, info=info
    )
    state.validate(mass0=problem.mass0)
    return state


def relax_deformation(
    params: PotentialParams,
    grid: Grid,
    family: DirichletFamily,
    psi: np.ndarray,
    t: float = 0.0,
    cfg: SolverConfig | None = None,
    lap: NeumannLaplacian | None = None,
    y_start: np.ndarray | None = None,
) -> np.ndarray:
    """Minimize the free energy over the deformation at fixed concentration.

    Produces well-prepared initial data: the scheme accepts any
    finite-energy y^0, but an unequilibrated start puts a mechanical
    boundary layer at t = 0 whose rate no time ladder resolves, and
    that layer then dominates refinement studies.  Relaxing first
    removes it.  Internally this is an increment problem with a huge
    step size (the proximal and viscous terms vanish) and the
    concentration block frozen.
    """
    cfg = cfg or SolverConfig()
    lap = lap or NeumannLaplacian(grid)
    y0 = grid.identity_map() if y_start is None else y_start
    problem = IncrementProblem(
        params,
        grid,
        family,
        lap,
        t,
        1e8,
        y0,
        psi,
        det_floor=cfg.det_floor,
    )
    y, _, _, _ = _descend(problem, cfg, freeze_psi=True)
    return y


def chemical_potential(
    new: NodalState,
    prev: NodalState,
    tau: float,
    family: DirichletFamily,
    params: PotentialParams,
    lap: NeumannLaplacian | None = None,
) -> tuple[np.ndarray, float]:
    """Reconstruct the chemical potential of an accepted step.

    mu = -(-Lap)^-1((psi_new - psi_prev)/tau) + lambda with the mass
    multiplier lambda = mean of the local psi-derivative of the energy
    density, both evaluated at the new state.  With this mu the
    discrete weak form of the evolution law holds by construction.
    """
    grid = new.grid
    lap = lap or NeumannLaplacian(grid)
    rate = (new.psi - prev.psi) / tau
    u = solve_poisson_meanfree(lap, rate, warm_key="mu")
    bundle = compose_deformation(family, new.t, grid, new.y)
    lam = float(grid.mean(dpsi_total(bundle.F, new.psi, params)))
    mu = -u + lam
    return mu, lam


def initial_concentration(
    grid: Grid,
    kind: str = "constant",
    mean: float = 0.0,
    amplitude: float = 0.1,
    seed: int = 0,
) -> np.ndarray:
    """Build the initial concentration field.

    kinds: `constant` (flat at `mean`), `stripe` (single cosine along
    the first axis), `noise` (seeded superposition of the lowest
    nonconstant Neumann cosine modes, per-axis index <= 1,
    sup-normalized to `amplitude`).  The result is repinned so its
    trapezoid mean equals `mean` exactly.

    The noise band is deliberately narrow: every seeded mode must
    evolve on a timescale the coarsest refinement-study rung still
    resolves, otherwise inter-rung interpolant distances stall at the
    amplitude of the unresolved band instead of contracting.
    """
    if kind == "constant":
        psi = np.full(grid.shape, float(mean))
    elif kind == "stripe":
        psi = mean + amplitude * np.cos(np.pi * grid.coords[0])
    elif kind == "noise":
        rng = np.random.default_rng(seed)
        psi = np.zeros(grid.shape)
        ks = [
            k
            for k in np.ndindex(*(2,) * grid.d)
            if any(k)  # skip the constant mode
        ]
        for k in ks:
            c = rng.standard_normal() / (1.0 + float(sum(ki**2 for ki in k)))
            mode = np.ones(grid.shape)
            for a, ka in enumerate(k):
                if ka:
                    mode = mode * np.cos(np.pi * ka * grid.coords[a])
            psi += c * mode
        sup = float(np.abs(psi).max())
        if sup > 0.0:
            psi *= amplitude / sup
        psi += mean
    else:
        raise ValueError(f"unknown initial concentration kind {kind!r}")
    psi += mean - grid.mean(psi)
    return psi


def run_simulation(cfg) -> Trajectory:
    """March the minimizing-movement scheme over an equidistant partition.

    `cfg` is a run configuration exposing make_grid, make_family,
    make_params, make_solver_config, make_initial_psi plus the scalars
    t_final, num_steps, and viscous_rate.  Per step the energy ledger
    records the breakdown, the proximal and viscous dissipation, the
    external-power integral, and the running two sides of the discrete
    energy-dissipation inequality.  Step errors are re-raised with the
    step index attached.
    """
    grid = cfg.make_grid()
    params = cfg.make_params()
    family = cfg.make_family()
    scfg = cfg.make_solver_config()
    viscous_rate = getattr(cfg, "viscous_rate", "composed")
    lap = NeumannLaplacian(grid)

    M = int(cfg.num_steps)
    if M < 1:
        raise ValidationError(f"need at least one step, got {M}")
    T = float(cfg.t_final)
    tau = T / M

    psi0 = cfg.make_initial_psi(grid)
    make_y = getattr(cfg, "make_initial_y", None)
    if make_y is not None:
        y0 = make_y(grid, family=family, params=params, psi=psi0, solver=scfg)
    else:
        y0 = grid.identity_map()
    breakdown0 = free_energy(params, grid, family, 0.0, y0, psi0, scfg.det_floor)
    if not breakdown0.finite:
        raise InfiniteEnergy("initial state is infeasible (determinant at floor)")
    state0 = NodalState(t=0.0, y=y0, psi=psi0, grid=grid, breakdown=breakdown0)
    mass0 = state0.mass
    state0.validate(mass0=mass0)

    states = [state0]
    records = [
        StepRecord(
            m=0,
            t=0.0,
            f_el=breakdown0.elastic,
            f_pf=breakdown0.phase,
            f_hy=breakdown0.hyper,
            total=breakdown0.total,
            hminus_dist=0.0,
            viscous=0.0,
            dt_F_integral=0.0,
            edi_lhs=breakdown0.total,
            edi_rhs=breakdown0.total,
            det_min=breakdown0.det_min,
            mass=mass0,
        )
    ]

    diss_sum = 0.0
    power_sum = 0.0
    prev = state0
    for m in range(1, M + 1):
        t_m = m * T / M
        problem = IncrementProblem(
            params,
            grid,
            family,
            lap,
            t_m,
            tau,
            prev.y,
            prev.psi,
            viscous_rate=viscous_rate,
            det_floor=scfg.det_floor,
        )
        try:
            y, psi, f, info = _descend(problem, scfg)
            fe, dist, visc, _ = problem.components(y, psi)
            power = external_power_integral(
                params, grid, family, t_m - tau, t_m, prev.y, prev.psi
            )
        except GelstepError as err:
            raise type(err)(f"step {m} (t = {t_m:.6g}): {err}") from err

        new = NodalState(
            t=t_m, y=y, psi=psi, grid=grid, breakdown=fe, info=info
        )
        new.validate(mass0=mass0)
        mu, lam = chemical_potential(new, prev, tau, family, params, lap=lap)
        new.mu, new.lam = mu, lam

        diss_sum += dist + tau * visc
        power_sum += power
        records.append(
            StepRecord(
                m=m,
                t=t_m,
                f_el=fe.elastic,
                f_pf=fe.phase,
                f_hy=fe.hyper,
                total=fe.total,
                hminus_dist=dist,
                viscous=visc,
                dt_F_integral=power,
                edi_lhs=fe.total + diss_sum,
                edi_rhs=breakdown0.total + power_sum,
                det_min=fe.det_min,
                mass=new.mass,
                iterations=info["iterations"],
                grad_norm=info["grad_norm"],
                budget_exceeded=info["budget_exceeded"],
            )
        )
        states.append(new)
        prev = new

    return Trajectory(
        grid=grid,
        family=family,
        params=params,
        tau=tau,
        t_final=T,
        states=states,
        records=records,
        solver_config=scfg,
        viscous_rate=viscous_rate,
    )
