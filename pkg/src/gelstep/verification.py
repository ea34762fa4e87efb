"""Post-hoc certificates for a completed discrete evolution.

Every check here recomputes its quantities from the stored states
rather than trusting the run ledger, so a bug in the marching loop
cannot certify itself.  Four entry points:

  check_edi          energy-dissipation inequality, step by step
  check_el_residuals weak-form residuals against a test-field battery
  check_apriori      the a-priori bound table and stability ratios
  refinement_study   time-step (and optionally mesh) refinement ladder

Each returns a VerificationReport whose verdicts always carry the
computed number next to the threshold it was compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .boundary import compose_deformation
from .energy import IncrementProblem, external_power_integral, free_energy
from .errors import ValidationError
from .grid import Grid
from .hminus import NeumannLaplacian, hminus_norm_sq, stiffness_form
from .potentials import dpsi_total, wpf_eval
from .solver import Trajectory, chemical_potential, run_simulation
from . import tensors

_TINY = 1e-300


@dataclass
class Verdict:
    """One pass/fail line: a computed number against its threshold."""

    name: str
    value: float
    threshold: float
    passed: bool
    sense: str = "<="
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = (
            f"{status} {self.name}: {self.value:.6e} {self.sense} "
            f"{self.threshold:.6e}"
        )
        if self.note:
            text += f"  [{self.note}]"
        return text


@dataclass
class VerificationReport:
    """Named bundle of verdicts plus the tables behind them."""

    name: str
    verdicts: list[Verdict]
    tables: dict[str, list[dict]] = field(default_factory=dict)
    scalars: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def summary(self) -> str:
        lines = [f"== {self.name} =="]
        lines += [v.line() for v in self.verdicts]
        lines.append(f"overall = {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _require_mu(traj: Trajectory, m: int) -> tuple[np.ndarray, float]:
    state = traj.states[m]
    if state.mu is None or state.lam is None:
        mu, lam = chemical_potential(
            state, traj.states[m - 1], traj.tau, traj.family, traj.params
        )
        state.mu, state.lam = mu, lam
    return state.mu, state.lam


def check_edi(
    traj: Trajectory,
    slack_factor: float = 1e-8,
    identity_rtol: float = 1e-8,
    ledger_rtol: float = 1e-9,
) -> VerificationReport:
    """Recompute the energy ledger and test the dissipation inequality.

    Per step m the ledger compares

      LHS(m) = F(t_m) + sum_{j<=m} (prox_j + tau visc_j)
      RHS(m) = F(0) + sum_{j<=m} power_j

    and requires LHS <= RHS + slack with slack = slack_factor (1+|F(0)|).
    Alongside it checks the exact interchange between the proximal
    half-square and the chemical-potential dissipation,
    prox_m = (tau/2) B(mu_m, mu_m), and single-step descent of the
    incremental functional.  The recomputed ledger is finally compared
    against the one stored during the march.
    """
    grid, family, params = traj.grid, traj.family, traj.params
    tau = traj.tau
    lap = NeumannLaplacian(grid)
    states = traj.states

    f0 = free_energy(params, grid, family, 0.0, states[0].y, states[0].psi).total
    scale = 1.0 + abs(f0)
    slack = slack_factor * scale

    rows = []
    worst_gap = -math.inf
    worst_identity = 0.0
    worst_ledger = 0.0
    worst_descent = -math.inf
    diss_sum = 0.0
    power_sum = 0.0

    for m in range(1, traj.num_steps + 1):
        prev, new = states[m - 1], states[m]
        problem = IncrementProblem(
            params, grid, family, lap, new.t, tau, prev.y, prev.psi,
            viscous_rate=traj.viscous_rate,
        )
        fe, dist, visc, _ = problem.components(new.y, new.psi)
        power = external_power_integral(
            params, grid, family, prev.t, new.t, prev.y, prev.psi
        )
        diss_sum += dist + tau * visc
        power_sum += power
        lhs = fe.total + diss_sum
        rhs = f0 + power_sum
        worst_gap = max(worst_gap, lhs - rhs)

        mu, _ = _require_mu(traj, m)
        grad_mu_sq = 0.5 * tau * stiffness_form(lap, mu, mu)
        # the absolute floor keeps a resting step (both sides at rounding
        # noise) from turning 0/0 into a spurious failure
        identity_rel = abs(dist - grad_mu_sq) / (max(dist, grad_mu_sq) + 1e-14 * scale)
        worst_identity = max(worst_identity, identity_rel)

        start = free_energy(params, grid, family, new.t, prev.y, prev.psi).total
        incremental = fe.total + dist + tau * visc
        worst_descent = max(worst_descent, incremental - start)

        rec = traj.records[m]
        worst_ledger = max(
            worst_ledger,
            abs(lhs - rec.edi_lhs) / scale,
            abs(rhs - rec.edi_rhs) / scale,
        )

        rows.append(
            {
                "m": m,
                "t": new.t,
                "free_energy": fe.total,
                "prox": dist,
                "viscous": visc,
                "power": power,
                "edi_lhs": lhs,
                "edi_rhs": rhs,
                "margin": rhs + slack - lhs,
                "identity_rel": identity_rel,
            }
        )

    verdicts = [
        Verdict("edi_inequality_gap", worst_gap, slack, worst_gap <= slack,
                note="max over steps of LHS - RHS"),
        Verdict("prox_gradmu_identity", worst_identity, identity_rtol,
                worst_identity <= identity_rtol,
                note="prox vs (tau/2) B(mu, mu), relative"),
        Verdict("incremental_descent", worst_descent, 1e-11 * scale,
                worst_descent <= 1e-11 * scale,
                note="max over steps of F^m(new) - F^m(prev)"),
        Verdict("ledger_consistency", worst_ledger, ledger_rtol,
                worst_ledger <= ledger_rtol,
                note="recomputed vs stored ledger, relative to 1+|F(0)|"),
    ]
    return VerificationReport("energy_dissipation", verdicts, {"ledger": rows})


def scalar_test_battery(grid: Grid, n_random: int = 20, seed: int = 0) -> list[np.ndarray]:
    """Constant, coordinate monomials up to degree two, and seeded
    smooth random fields (low-order polynomial times a trigonometric
    factor per axis)."""
    coords = grid.coords
    fields = [np.ones(grid.shape)]
    for a in range(grid.d):
        fields.append(coords[a].copy())
    for a in range(grid.d):
        for b in range(a, grid.d):
            fields.append(coords[a] * coords[b])
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        f = np.ones(grid.shape)
        for a in range(grid.d):
            x = coords[a]
            c0, c1 = rng.uniform(-1.0, 1.0, size=2)
            k = int(rng.integers(1, 4))
            phase = rng.uniform(0.0, 2.0 * math.pi)
            f = f * (c0 + c1 * x + np.cos(np.pi * k * x + phase))
        fields.append(f)
    return fields


def _dirichlet_bubble(grid: Grid) -> np.ndarray:
    """Smooth factor vanishing exactly on the Dirichlet set."""
    x0 = grid.coords[0]
    if grid.dirichlet == "min":
        return x0.copy()
    if grid.dirichlet == "max":
        return 1.0 - x0
    if grid.dirichlet == "both":
        return x0 * (1.0 - x0)
    bubble = np.ones(grid.shape)
    for a in range(grid.d):
        bubble = bubble * grid.coords[a] * (1.0 - grid.coords[a])
    return bubble


def check_el_residuals(
    traj: Trajectory,
    n_tests: int = 20,
    seed: int = 0,
    kappa: float = 100.0,
) -> VerificationReport:
    """Weak-form residuals of the three Euler-Lagrange identities.

    At every step the converged state is tested against the battery:

      elastic     <dPhi/dy, dy(w)> with dy = (grad vD)^-1 w and w
                  vanishing on the Dirichlet set
      chemical    int mu zeta  vs  int dW/dpsi zeta + flux . grad zeta
      evolution   int rate zeta  vs  -B(mu, zeta)

    Residuals are normalized by the magnitudes of the paired terms and
    must stay below kappa times the optimizer's gradient tolerance.
    The constant test field in the chemical identity recovers the
    Lagrange-multiplier relation lambda |Omega| = int dW/dpsi exactly.
    """
    grid, family, params = traj.grid, traj.family, traj.params
    tau = traj.tau
    lap = NeumannLaplacian(grid)
    gtol = traj.solver_config.grad_tol
    threshold = kappa * gtol

    zetas = scalar_test_battery(grid, n_random=n_tests, seed=seed)
    bubble = _dirichlet_bubble(grid)
    mask = grid.dirichlet_mask
    d = grid.d

    zeta_grads = [grid.grad(z) for z in zetas]
    zeta_l2 = [np.linalg.norm(z) for z in zetas]
    zeta_stiff = [max(stiffness_form(lap, z, z), 0.0) for z in zetas]

    worst = {"weak_elast": 0.0, "weak_chem": 0.0, "weak_time": 0.0}
    rows = []

    for m in range(1, traj.num_steps + 1):
        prev, new = traj.states[m - 1], traj.states[m]
        problem = IncrementProblem(
            params, grid, family, lap, new.t, tau, prev.y, prev.psi,
            viscous_rate=traj.viscous_rate,
        )
        f, gy, _ = problem.value_and_grad(new.y, new.psi)
        scale = 1.0 + abs(f)

        bundle = compose_deformation(family, new.t, grid, new.y)
        j_inv, _ = tensors.mat_inv_det(bundle.J)
        mu, _ = _require_mu(traj, m)
        grad_psi = grid.grad(new.psi)
        _, _, flux, _ = wpf_eval(new.psi, grad_psi, bundle.F, params)
        dpsi_point = dpsi_total(bundle.F, new.psi, params)
        rate = (new.psi - prev.psi) / tau
        rate_l2 = math.sqrt(max(float(grid.integrate(rate * rate)), 0.0))
        mu_stiff = max(stiffness_form(lap, mu, mu), 0.0)

        step_worst = {"weak_elast": 0.0, "weak_chem": 0.0, "weak_time": 0.0}
        for idx, zeta in enumerate(zetas):
            # elastic: velocity-space test field, zero on the Dirichlet set
            w = np.zeros((d,) + grid.shape)
            w[idx % d] = bubble * zeta
            dy = tensors.matvec(j_inv, w)
            dy[:, mask] = 0.0
            res = abs(float(np.sum(gy * dy)))
            denom = scale * max(np.linalg.norm(dy), _TINY)
            step_worst["weak_elast"] = max(step_worst["weak_elast"], res / denom)

            # chemical: nodal weak form against the stored potential
            lhs = float(grid.integrate(mu * zeta))
            rhs = float(grid.integrate(dpsi_point * zeta))
            for j in range(d):
                rhs += float(grid.integrate(flux[j] * zeta_grads[idx][j]))
            denom = scale * max(zeta_l2[idx], _TINY) + abs(lhs) + abs(rhs)
            step_worst["weak_chem"] = max(step_worst["weak_chem"], abs(lhs - rhs) / denom)

            # evolution: increment rate against the stiffness form of mu;
            # the scale floor covers resting steps where both sides sit at
            # rounding noise
            lhs = float(grid.integrate(rate * zeta))
            rhs = -stiffness_form(lap, mu, zeta)
            zl2 = math.sqrt(max(float(grid.integrate(zeta * zeta)), 0.0))
            denom = (
                abs(lhs) + abs(rhs) + rate_l2 * zl2
                + math.sqrt(mu_stiff * zeta_stiff[idx]) + 1e-14 * scale
            )
            step_worst["weak_time"] = max(step_worst["weak_time"], abs(lhs - rhs) / denom)

        for key in worst:
            worst[key] = max(worst[key], step_worst[key])
        rows.append({"m": m, "t": new.t, **step_worst})

    verdicts = [
        Verdict(f"{key}_residual", worst[key], threshold, worst[key] <= threshold,
                note=f"max over {traj.num_steps} steps x {len(zetas)} test fields")
        for key in ("weak_elast", "weak_chem", "weak_time")
    ]
    return VerificationReport("euler_lagrange_residuals", verdicts, {"residuals": rows})


def _entrywise_lp(grid: Grid, field_nd: np.ndarray, power: float, order: int) -> float:
    """Trapezoid integral of the entrywise |.|^power over tensor axes."""
    mag = np.sum(np.abs(field_nd) ** power, axis=tuple(range(order)))
    return float(grid.integrate(mag))


def check_apriori(
    traj: Trajectory,
    gronwall_ceiling: float = 100.0,
    mass_tol: float = 1e-10,
) -> VerificationReport:
    """Discrete a-priori bound table for one trajectory.

    Conventions: the W^{1,p} norm uses the pointwise Frobenius norm of
    grad y; the W^{2,beta} second-gradient block uses the entrywise
    lattice ell^beta norm of the nodal Hessian (trapezoid weights in
    space).  Rates of the piecewise-linear interpolants are summed as
    sum_m tau ||.||^2.  The Gronwall ratio divides the running EDI
    left-hand side by 1 + F(0).  The Korn quotient (min over steps of
    int |Cdot|^2 over the squared H^1 norm of the composed velocity
    rate) is advisory and never gates.
    """
    grid, params = traj.grid, traj.params
    tau = traj.tau
    lap = NeumannLaplacian(grid)
    states = traj.states
    p, beta = params.p, params.beta

    w1p_max = 0.0
    w2b_max = 0.0
    det_min = math.inf
    psi_h1_max = 0.0
    mass_drift = 0.0
    mass0 = states[0].mass

    grads = []
    for s in states:
        X = grid.grad(s.y)
        Y = grid.hess(s.y)
        grads.append(X)
        frob_x = tensors.frob(X, 2)
        w1p = (
            float(grid.integrate(np.sum(np.abs(s.y) ** p, axis=0)))
            + float(grid.integrate(frob_x**p))
        ) ** (1.0 / p)
        w2b = (
            float(grid.integrate(np.sum(np.abs(s.y) ** beta, axis=0)))
            + _entrywise_lp(grid, X, beta, 2)
            + _entrywise_lp(grid, Y, beta, 3)
        ) ** (1.0 / beta)
        w1p_max = max(w1p_max, w1p)
        w2b_max = max(w2b_max, w2b)
        det_min = min(det_min, float(tensors.mat_det(X).min()))
        gpsi = grid.grad(s.psi)
        psi_h1 = math.sqrt(
            max(float(grid.integrate(s.psi**2 + np.sum(gpsi * gpsi, axis=0))), 0.0)
        )
        psi_h1_max = max(psi_h1_max, psi_h1)
        mass_drift = max(mass_drift, abs(s.mass - mass0))

    rate_sq = 0.0
    dual_sq = 0.0
    mu_sq = 0.0
    korn = math.inf
    for m in range(1, traj.num_steps + 1):
        prev, new = states[m - 1], states[m]
        ry = (new.y - prev.y) / tau
        grad_ry = grid.grad(ry)
        rate_sq += tau * float(
            grid.integrate(np.sum(ry * ry, axis=0) + np.sum(grad_ry**2, axis=(0, 1)))
        )
        rpsi = (new.psi - prev.psi) / tau
        dual_sq += tau * hminus_norm_sq(lap, rpsi, warm_key="apriori")
        mu, _ = _require_mu(traj, m)
        mu_sq += tau * (float(grid.integrate(mu * mu)) + stiffness_form(lap, mu, mu))

        j_prev = traj.family.jac(new.t, prev.y)
        f_prev = tensors.matmul(j_prev, grads[m - 1])
        f_dot = tensors.matmul(j_prev, grad_ry)
        c_dot = tensors.matmul(tensors.transpose(f_dot), f_prev)
        c_dot = c_dot + tensors.transpose(c_dot)
        num = float(grid.integrate(np.sum(c_dot * c_dot, axis=(0, 1))))
        rate_v = tensors.matvec(j_prev, ry)
        den = float(
            grid.integrate(np.sum(rate_v * rate_v, axis=0) + np.sum(f_dot**2, axis=(0, 1)))
        )
        if den > 1e-14:
            korn = min(korn, num / den)

    f0 = traj.records[0].total
    gronwall = max(rec.edi_lhs for rec in traj.records) / (1.0 + f0)

    bounds = {
        "linf_w1p_y": w1p_max,
        "linf_w2beta_y": w2b_max,
        "sup_det_inv": 1.0 / det_min if det_min > 0 else math.inf,
        "l2h1_rate_y": math.sqrt(rate_sq),
        "linf_h1_psi": psi_h1_max,
        "dual_v0_rate_psi": math.sqrt(dual_sq),
        "l2h1_mu": math.sqrt(mu_sq),
        "gronwall_ratio": gronwall,
    }
    extras = {
        "det_min": det_min,
        "mass_drift": mass_drift,
        "korn_quotient": korn if math.isfinite(korn) else float("nan"),
    }

    finite_worst = max(bounds.values())
    verdicts = [
        Verdict("bounds_finite", finite_worst, math.inf,
                math.isfinite(finite_worst), sense="<",
                note="largest entry of the bound table"),
        Verdict("det_positive", det_min, 0.0, det_min > 0.0, sense=">",
                note="min over steps and nodes of det(grad y)"),
        Verdict("mass_drift", mass_drift, mass_tol, mass_drift <= mass_tol),
        Verdict("gronwall_ratio", gronwall, gronwall_ceiling,
                gronwall <= gronwall_ceiling),
        Verdict("korn_quotient", extras["korn_quotient"], 0.0, True, sense=">",
                note="advisory"),
    ]
    table = [{"name": k, "value": v} for k, v in {**bounds, **extras}.items()]
    return VerificationReport(
        "apriori_bounds", verdicts, {"bounds": table}, scalars={**bounds, **extras}
    )


def _restrict(field_nd: np.ndarray, n_fine: int, n_coarse: int, d: int) -> np.ndarray:
    """Restrict nodal values from a fine lattice to a nested coarse one."""
    if n_fine == n_coarse:
        return field_nd
    if (n_fine - 1) % (n_coarse - 1) != 0:
        raise ValidationError(
            f"grids are not nested: {n_fine} nodes per axis cannot restrict "
            f"to {n_coarse}"
        )
    stride = (n_fine - 1) // (n_coarse - 1)
    slicer = (...,) + (slice(None, None, stride),) * d
    return field_nd[slicer]


@dataclass
class RefinementResult:
    """Ladder of runs with pairwise interpolant distances."""

    report: VerificationReport
    trajectories: list[Trajectory]
    rows: list[dict]

    @property
    def passed(self) -> bool:
        return self.report.passed


def refinement_study(problem, M_list, n_list=None, gate: str = "both") -> RefinementResult:
    """Run a time-step refinement ladder and compare hat interpolants.

    `problem` is a run configuration dataclass; each rung replaces its
    num_steps (and, when n_list is given, its per-axis resolution n,
    which must then be nested).  For consecutive rungs the piecewise
    linear interpolants are compared at the coarser rung's time nodes
    in the discrete H^1 norms of y and psi; the study passes when the
    gated distance sequences strictly decrease.  `gate` selects which
    field gates ("y", "psi", or "both"): a concentration-driven problem
    contracts in psi first, a loading-driven one in y, and the
    non-gated sequence is still reported as advisory.
    """
    if gate not in ("y", "psi", "both"):
        raise ValidationError(f"gate must be y, psi, or both, got {gate!r}")
    M_values = list(M_list)
    if len(M_values) < 3:
        raise ValidationError("refinement ladder needs at least three rungs")
    if sorted(M_values) != M_values or len(set(M_values)) != len(M_values):
        raise ValidationError(f"M_list must be strictly increasing, got {M_values}")
    if n_list is None:
        n_values = [problem.n] * len(M_values)
    else:
        n_values = list(n_list)
        if len(n_values) != len(M_values):
            raise ValidationError("n_list must match M_list in length")

    trajectories = [
        run_simulation(replace(problem, num_steps=M, n=n))
        for M, n in zip(M_values, n_values)
    ]

    def h1_dist(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
        diff = a - b
        comp_axes = tuple(range(diff.ndim - grid.d))
        sq = np.sum(diff * diff, axis=comp_axes) if comp_axes else diff * diff
        grad = grid.grad(diff)
        gaxes = tuple(range(grad.ndim - grid.d))
        sq = sq + np.sum(grad * grad, axis=gaxes)
        return math.sqrt(max(float(grid.integrate(sq)), 0.0))

    rows = []
    dist_y_seq = []
    dist_psi_seq = []
    for k in range(len(trajectories) - 1):
        coarse, fine = trajectories[k], trajectories[k + 1]
        grid = coarse.grid
        dy = 0.0
        dpsi = 0.0
        for t in coarse.times:
            yc, pc = coarse.linear(float(t))
            yf, pf = fine.linear(float(t))
            yf = _restrict(yf, fine.grid.n, grid.n, grid.d)
            pf = _restrict(pf, fine.grid.n, grid.n, grid.d)
            dy = max(dy, h1_dist(grid, yc, yf))
            dpsi = max(dpsi, h1_dist(grid, pc, pf))
        dist_y_seq.append(dy)
        dist_psi_seq.append(dpsi)
        rows.append(
            {
                "M_coarse": M_values[k],
                "M_fine": M_values[k + 1],
                "dist_h1_y": dy,
                "dist_h1_psi": dpsi,
            }
        )
    for k in range(1, len(rows)):
        prev, cur = rows[k - 1], rows[k]
        cur["order_y"] = (
            math.log2(prev["dist_h1_y"] / cur["dist_h1_y"])
            if cur["dist_h1_y"] > 0 else math.inf
        )
        cur["order_psi"] = (
            math.log2(prev["dist_h1_psi"] / cur["dist_h1_psi"])
            if cur["dist_h1_psi"] > 0 else math.inf
        )

    def worst_ratio(seq: list[float]) -> float:
        ratios = [
            seq[i + 1] / seq[i] if seq[i] > 0 else 0.0
            for i in range(len(seq) - 1)
        ]
        return max(ratios) if ratios else 0.0

    ry, rp = worst_ratio(dist_y_seq), worst_ratio(dist_psi_seq)
    gate_y, gate_psi = gate in ("y", "both"), gate in ("psi", "both")
    verdicts = [
        Verdict("refine_y_contraction", ry, 1.0, ry < 1.0 or not gate_y,
                sense="<",
                note="max ratio of consecutive H1(y) distances"
                + ("" if gate_y else "; advisory")),
        Verdict("refine_psi_contraction", rp, 1.0, rp < 1.0 or not gate_psi,
                sense="<",
                note="max ratio of consecutive H1(psi) distances"
                + ("" if gate_psi else "; advisory")),
    ]
    report = VerificationReport("refinement_study", verdicts, {"distances": rows})
    return RefinementResult(report=report, trajectories=trajectories, rows=rows)
