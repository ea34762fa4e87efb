"""The incremental functional, its gradient, and the power bookkeeping.

The gradient check here is a light version of the acceptance oracle
(fewer states and directions); the acceptance suite runs the full
battery at its stated tolerances.
"""

import numpy as np
import pytest

from gelstep import (
    AffineFamily,
    GentleBendFamily,
    Grid,
    IdentityFamily,
    InfiniteEnergy,
    NeumannLaplacian,
    PotentialParams,
    external_power_integral,
    free_energy,
)
from gelstep.energy import IncrementProblem, dt_free_energy
from gelstep.oracles import incremental_fd_residual, random_admissible_state


@pytest.fixture(scope="module")
def setup():
    grid = Grid(2, 9)
    return grid, PotentialParams(), NeumannLaplacian(grid)


def test_incremental_gradient_matches_fd(setup):
    grid, params, lap = setup
    family = GentleBendFamily(amplitude=0.02, d=2, horizon=1.0)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(3):
        t, y_prev, psi_prev, y, psi = random_admissible_state(
            grid, family, params, rng
        )
        problem = IncrementProblem(
            params, grid, family, lap, t, 0.05, y_prev, psi_prev
        )
        worst = max(
            worst, incremental_fd_residual(problem, y, psi, rng, num_dirs=5)
        )
    assert worst <= 1e-5, f"max relative error {worst:.3e}"


def test_value_and_grad_agree_on_value(setup):
    grid, params, lap = setup
    family = IdentityFamily(d=2, horizon=1.0)
    rng = np.random.default_rng(1)
    t, y_prev, psi_prev, y, psi = random_admissible_state(
        grid, family, params, rng
    )
    problem = IncrementProblem(params, grid, family, lap, t, 0.05, y_prev, psi_prev)
    f, gy, gpsi = problem.value_and_grad(y, psi)
    assert f == pytest.approx(problem.value(y, psi), rel=1e-14)
    assert gy.shape == y.shape and gpsi.shape == psi.shape
    # the solver relies on the y-gradient vanishing on the pinned faces
    assert not gy[:, grid.dirichlet_mask].any()


def test_components_sum_to_value(setup):
    grid, params, lap = setup
    family = IdentityFamily(d=2, horizon=1.0)
    rng = np.random.default_rng(2)
    t, y_prev, psi_prev, y, psi = random_admissible_state(
        grid, family, params, rng
    )
    tau = 0.05
    problem = IncrementProblem(params, grid, family, lap, t, tau, y_prev, psi_prev)
    fe, dist, visc, _ = problem.components(y, psi)
    assert problem.value(y, psi) == pytest.approx(
        fe.total + dist + tau * visc, rel=1e-12
    )
    assert dist >= 0.0 and visc >= 0.0


def test_functional_at_previous_state_is_plain_energy(setup):
    """With zero increment both the proximal and viscous terms vanish."""
    grid, params, lap = setup
    family = IdentityFamily(d=2, horizon=1.0)
    rng = np.random.default_rng(3)
    t, y_prev, psi_prev, _, _ = random_admissible_state(grid, family, params, rng)
    problem = IncrementProblem(params, grid, family, lap, t, 0.05, y_prev, psi_prev)
    fe = free_energy(params, grid, family, t, y_prev, psi_prev)
    assert problem.value(y_prev, psi_prev) == pytest.approx(fe.total, rel=1e-14)


def test_breakdown_structure(setup):
    grid, params, _ = setup
    family = IdentityFamily(d=2, horizon=1.0)
    fe = free_energy(params, grid, family, 0.0, grid.identity_map(), np.zeros(grid.shape))
    assert fe.finite
    assert fe.total == pytest.approx(fe.elastic + fe.phase + fe.hyper)
    # identity at psi = 0: g = 1, no gradients, wells at depth a/4
    assert fe.hyper == pytest.approx(0.0, abs=1e-14)
    assert fe.phase == pytest.approx(0.25 * params.a_dw)
    assert fe.det_min == pytest.approx(1.0)


def test_infeasible_state_is_infinite(setup):
    grid, params, _ = setup
    family = IdentityFamily(d=2, horizon=1.0)
    y = grid.identity_map()
    y[0] *= 1e-9  # crushes the determinant below the floor
    fe = free_energy(params, grid, family, 0.0, y, np.zeros(grid.shape))
    assert not fe.finite and fe.total == np.inf
    with pytest.raises(InfiniteEnergy):
        dt_free_energy(params, grid, family, 0.0, y, np.zeros(grid.shape))


def test_power_integral_identity_family_is_zero(setup):
    grid, params, _ = setup
    family = IdentityFamily(d=2, horizon=1.0)
    val = external_power_integral(
        params, grid, family, 0.1, 0.3, grid.identity_map(), np.zeros(grid.shape)
    )
    assert val == 0.0


@pytest.mark.parametrize(
    "family",
    [
        AffineFamily(np.array([[0.25, 0.1], [0.0, 0.0]]), d=2, horizon=1.0),
        GentleBendFamily(amplitude=0.05, frequency=1.0, d=2, horizon=1.0),
    ],
    ids=["affine", "bend"],
)
def test_power_integral_is_energy_difference(setup, family):
    """Fundamental theorem of calculus at a frozen state."""
    grid, params, _ = setup
    rng = np.random.default_rng(4)
    x, yy = grid.coords
    bubble = x * (1 - x) * yy * (1 - yy)
    y = grid.identity_map() + 0.05 * np.stack([bubble, bubble])
    psi = 0.1 * np.cos(np.pi * x)
    t0, t1 = 0.2, 0.45
    integral = external_power_integral(params, grid, family, t0, t1, y, psi)
    diff = (
        free_energy(params, grid, family, t1, y, psi).total
        - free_energy(params, grid, family, t0, y, psi).total
    )
    assert integral == pytest.approx(diff, rel=1e-10)


def test_viscous_rate_variants(setup):
    """Both rate conventions accept, anything else is rejected."""
    grid, params, lap = setup
    family = IdentityFamily(d=2, horizon=1.0)
    y_prev = grid.identity_map()
    psi_prev = np.zeros(grid.shape)
    for rate in ("composed", "raw"):
        IncrementProblem(
            params, grid, family, lap, 0.1, 0.05, y_prev, psi_prev, viscous_rate=rate
        )
    with pytest.raises(ValueError, match="viscous_rate"):
        IncrementProblem(
            params, grid, family, lap, 0.1, 0.05, y_prev, psi_prev, viscous_rate="exact"
        )


def test_dirichlet_distortion_enters_energy(setup):
    """The same nodal y costs more under a stretching distortion."""
    grid, params, _ = setup
    stretch = AffineFamily(np.diag([0.3, 0.0]), d=2, horizon=1.0)
    y = grid.identity_map()
    psi = np.zeros(grid.shape)
    rest = free_energy(params, grid, IdentityFamily(d=2, horizon=1.0), 0.0, y, psi)
    loaded = free_energy(params, grid, stretch, 1.0, y, psi)
    assert loaded.total > rest.total
