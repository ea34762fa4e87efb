"""Acceptance gate: the eight load-bearing guarantees of the package.

Each test prints a single pass/fail line (visible with -s or on
failure) stating the computed number against its stated tolerance, and
asserts it.  Everything runs at desk scale: d = 2, n <= 33, M <= 64.
"""

import logging
import time

import numpy as np
import pytest

from gelstep import (
    AffineFamily,
    GentleBendFamily,
    Grid,
    IdentityFamily,
    IncrementProblem,
    NeumannLaplacian,
    PotentialParams,
    ValidationError,
    check_apriori,
    check_edi,
    check_el_residuals,
    parse_config,
)
from gelstep.boundary import smallness_check
from gelstep.cli import _log_preflight
from gelstep.oracles import (
    dense_poisson_mismatch,
    frame_indifference_residuals,
    incremental_fd_residual,
    potential_fd_residuals,
    random_admissible_state,
    vnorm_refinement,
)


def report(num: int, name: str, passed: bool, detail: str) -> None:
    print(f"criterion {num} {'PASS' if passed else 'FAIL'} {name}: {detail}")
    assert passed, f"criterion {num} ({name}): {detail}"


def test_criterion_1_incremental_gradient_matches_fd():
    start = time.perf_counter()
    grid = Grid(2, 9)
    params = PotentialParams()
    lap = NeumannLaplacian(grid)
    families = [
        IdentityFamily(d=2, horizon=1.0),
        GentleBendFamily(amplitude=0.02, frequency=1.0, d=2, horizon=1.0),
        AffineFamily(np.array([[0.05, 0.02], [0.0, 0.0]]), d=2, horizon=1.0),
    ]
    rng = np.random.default_rng(11)
    worst = 0.0
    for k in range(10):
        family = families[k % len(families)]
        t, y_prev, psi_prev, y, psi = random_admissible_state(
            grid, family, params, rng
        )
        problem = IncrementProblem(
            params, grid, family, lap, t, 0.01, y_prev, psi_prev
        )
        worst = max(
            worst, incremental_fd_residual(problem, y, psi, rng, num_dirs=20)
        )
    elapsed = time.perf_counter() - start
    report(
        1,
        "incremental gradient",
        worst <= 1e-5 and elapsed <= 30.0,
        f"worst rel {worst:.3e} <= 1e-05 over 10 states x 20 directions, "
        f"{elapsed:.1f} s <= 30 s",
    )


def test_criterion_2_potential_derivatives_match_fd():
    res = potential_fd_residuals(PotentialParams(), samples=1000, seed=2)
    assert set(res) == {
        "wel_stress",
        "why_hyperstress",
        "wpf_partials",
        "dpsi_total",
        "viscous_stress",
    }
    worst = max(res.values())
    report(
        2,
        "potential derivatives",
        worst <= 1e-5,
        f"worst rel {worst:.3e} <= 1e-05 over {len(res)} derivative groups "
        "x 1000 points",
    )


def test_criterion_3_frame_indifference():
    res = frame_indifference_residuals(PotentialParams(), samples=10000, seed=3)
    worst = max(res["static"], res["dynamic"])
    report(
        3,
        "frame indifference",
        worst <= 1e-10,
        f"static {res['static']:.3e}, dynamic {res['dynamic']:.3e} <= 1e-10 "
        "over 10000 rotation samples",
    )


def test_criterion_4_dual_norm_oracle():
    gap = dense_poisson_mismatch(n=9, seed=4)
    values, orders = vnorm_refinement()
    exact = 1.0 / (2.0 * np.pi**2)
    ok = gap <= 1e-8 and min(orders) >= 1.9
    report(
        4,
        "mean-free Poisson solve",
        ok,
        f"dense mismatch {gap:.3e} <= 1e-08; cos(pi x_0) dual norm "
        f"{values[-1]:.6f} -> {exact:.6f} at orders {[f'{o:.2f}' for o in orders]}"
        " >= 1.9",
    )


def test_criterion_5_scheme_laws_on_canonical_runs(canonical_trajs):
    worst_line = ""
    ok = True
    for name, traj in canonical_trajs.items():
        edi = check_edi(traj)
        verdicts = {v.name: v for v in edi.verdicts}
        mass0 = traj.records[0].mass
        drift = max(abs(r.mass - mass0) for r in traj.records)
        det_min = min(r.det_min for r in traj.records)
        run_ok = (
            verdicts["incremental_descent"].passed
            and verdicts["edi_inequality_gap"].passed
            and verdicts["prox_gradmu_identity"].passed
            and drift <= 1e-10
            and det_min >= 1e-4
        )
        ok = ok and run_ok
        worst_line += (
            f" [{name}: edi gap {verdicts['edi_inequality_gap'].value:.2e}"
            f" <= {verdicts['edi_inequality_gap'].threshold:.2e},"
            f" mass drift {drift:.2e}, det_min {det_min:.3f}]"
        )
    report(5, "scheme laws on three canonical runs", ok, worst_line.strip())


def test_criterion_6_euler_lagrange_residuals(canonical_trajs):
    worst = 0.0
    threshold = None
    ok = True
    for traj in canonical_trajs.values():
        rep = check_el_residuals(traj, n_tests=20, seed=0, kappa=100.0)
        ok = ok and rep.passed
        worst = max(worst, max(v.value for v in rep.verdicts))
        threshold = rep.verdicts[0].threshold
    report(
        6,
        "weak-form residuals",
        ok,
        f"worst residual {worst:.3e} <= 100 x grad_tol = {threshold:.3e} "
        "on all three runs",
    )


def test_criterion_7_refinement_and_uniform_bounds(spinodal_ladder):
    dists = [row["dist_h1_psi"] for row in spinodal_ladder.rows]
    decreasing = all(a > b > 0.0 for a, b in zip(dists, dists[1:]))

    keys = (
        "linf_w1p_y",
        "linf_w2beta_y",
        "sup_det_inv",
        "l2h1_rate_y",
        "linf_h1_psi",
        "dual_v0_rate_psi",
        "l2h1_mu",
        "gronwall_ratio",
    )
    tables = [check_apriori(t).scalars for t in spinodal_ladder.trajectories]
    worst_spread = 0.0
    for key in keys:
        vals = [tab[key] for tab in tables]
        lo, hi = min(vals), max(vals)
        if hi > 1e-12:
            worst_spread = max(worst_spread, (hi - lo) / lo)
    ok = decreasing and worst_spread < 0.20
    report(
        7,
        "refinement ladder M in {8,16,32,64}",
        ok,
        f"psi distances {[f'{x:.2e}' for x in dists]} strictly decrease; "
        f"bound-table spread {worst_spread:.1%} < 20%",
    )


def test_criterion_8_config_gates(caplog):
    with pytest.raises(ValidationError, match="exponent chain"):
        PotentialParams(d=2, beta=2.0)
    with pytest.raises(ValidationError, match="exponent chain"):
        parse_config("[material]\nbeta = 2.0\n")

    harsh = smallness_check(
        GentleBendFamily(amplitude=0.5, frequency=1.5, d=2, horizon=1.0),
        gamma=1.0,
        alpha=1.0,
        beta=3.0,
    )
    assert not harsh.passed

    cfg = parse_config(
        "[boundary]\nfamily = bend\namplitude = 0.5\nfrequency = 1.5\n"
    )
    with caplog.at_level(logging.WARNING, logger="gelstep"):
        _log_preflight(cfg)
    warned = any(
        "smallness" in rec.message and rec.levelno == logging.WARNING
        for rec in caplog.records
    )
    report(
        8,
        "assumption gates",
        warned,
        "exponent-chain violation rejects citing the assumption; "
        "oversized boundary distortion warns and proceeds",
    )
