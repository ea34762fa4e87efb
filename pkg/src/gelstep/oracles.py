"""Independent numerical oracles.

The CLI self-test and the test suite both need trusted references that
do not reuse the code paths they are checking: central finite
differences for every analytic derivative, a dense eigendecomposition
for the Poisson solver, sampled frame-indifference residuals, and an
admissible-state generator for the incremental functional.  They live
here so the two callers cannot drift apart.
"""

from __future__ import annotations

import math

import numpy as np

from .boundary import DirichletFamily, compose_deformation
from .energy import IncrementProblem
from .grid import Grid
from .hminus import NeumannLaplacian, hminus_norm_sq, solve_poisson_meanfree
from .potentials import (
    PotentialParams,
    dpsi_total,
    g_eval,
    viscous_eval,
    wel_eval,
    why_eval,
    wpf_eval,
)
from . import tensors

_TINY = 1e-300


def random_rotations(d: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Proper rotations, shape (d, d, samples)."""
    if d == 2:
        theta = rng.uniform(0.0, 2.0 * math.pi, samples)
        c, s = np.cos(theta), np.sin(theta)
        R = np.empty((2, 2, samples))
        R[0, 0], R[0, 1] = c, -s
        R[1, 0], R[1, 1] = s, c
        return R
    R = np.empty((d, d, samples))
    for i in range(samples):
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        R[..., i] = q
    return R


def random_invertible(
    d: int, samples: int, rng: np.random.Generator, spread: float = 0.3,
    det_floor: float = 0.25,
) -> np.ndarray:
    """Matrices near the identity with determinant bounded below."""
    A = np.zeros((d, d, samples))
    for i in range(d):
        A[i, i] = 1.0
    A = A + spread * rng.standard_normal((d, d, samples))
    det = tensors.mat_det(A)
    bad = det < det_floor
    while np.any(bad):
        k = int(bad.sum())
        fresh = np.zeros((d, d, k))
        for i in range(d):
            fresh[i, i] = 1.0
        fresh += spread * rng.standard_normal((d, d, k))
        A[..., bad] = fresh
        det = tensors.mat_det(A)
        bad = det < det_floor
    return A


def _rel(fd: np.ndarray, an: np.ndarray, scale: np.ndarray | float) -> float:
    denom = np.maximum(np.abs(an), 1e-6 * np.asarray(scale) + _TINY)
    return float(np.max(np.abs(fd - an) / denom))


def potential_fd_residuals(
    params: PotentialParams,
    samples: int = 1000,
    seed: int = 0,
    h: float = 1e-5,
) -> dict[str, float]:
    """Central-difference check of every analytic potential derivative.

    Each sample draws its own random direction; the relative error
    normalizes by max(|analytic|, 1e-6 * derivative scale) so
    near-orthogonal directions cannot divide by zero.
    """
    rng = np.random.default_rng(seed)
    d = params.d
    out: dict[str, float] = {}

    def unit(shape):
        E = rng.standard_normal(shape)
        norm = np.sqrt(np.sum(E * E, axis=tuple(range(len(shape) - 1))))
        return E / np.maximum(norm, _TINY)

    # elastic stress
    A = random_invertible(d, samples, rng)
    val, stress = wel_eval(A, params)
    E = unit((d, d, samples))
    fd = (wel_eval(A + h * E, params)[0] - wel_eval(A - h * E, params)[0]) / (2 * h)
    an = tensors.ddot(stress, E)
    out["wel_stress"] = _rel(fd, an, tensors.frob(stress, 2))

    # hyperstress
    G = 0.8 * rng.standard_normal((d, d, d, samples))
    val, hyper = why_eval(G, params)
    E3 = unit((d, d, d, samples))
    fd = (why_eval(G + h * E3, params)[0] - why_eval(G - h * E3, params)[0]) / (2 * h)
    an = tensors.triple_dot(hyper, E3)
    out["why_hyperstress"] = _rel(fd, an, tensors.frob(hyper, 3))

    # phase-field partials, all three arguments at once
    psi = rng.uniform(-1.4, 1.4, samples)
    gpsi = 0.8 * rng.standard_normal((d, samples))
    F = random_invertible(d, samples, rng)
    _, d_psi, d_gpsi, d_F = wpf_eval(psi, gpsi, F, params)
    e_psi = rng.standard_normal(samples)
    e_gpsi = rng.standard_normal((d, samples))
    e_F = rng.standard_normal((d, d, samples))
    norm = np.sqrt(e_psi**2 + np.sum(e_gpsi**2, axis=0) + np.sum(e_F**2, axis=(0, 1)))
    e_psi, e_gpsi, e_F = e_psi / norm, e_gpsi / norm, e_F / norm
    fd = (
        wpf_eval(psi + h * e_psi, gpsi + h * e_gpsi, F + h * e_F, params)[0]
        - wpf_eval(psi - h * e_psi, gpsi - h * e_gpsi, F - h * e_F, params)[0]
    ) / (2 * h)
    an = d_psi * e_psi + np.sum(d_gpsi * e_gpsi, axis=0) + tensors.ddot(d_F, e_F)
    scale = np.abs(d_psi) + tensors.frob(d_gpsi[:, None], 2) + tensors.frob(d_F, 2)
    out["wpf_partials"] = _rel(fd, an, scale)

    # total concentration derivative including the swelling coupling
    def elastic_of_psi(s):
        g, _ = g_eval(s, params)
        return wel_eval(F / g, params)[0] + 0.25 * params.a_dw * (s**2 - 1.0) ** 2

    fd = (elastic_of_psi(psi + h) - elastic_of_psi(psi - h)) / (2 * h)
    an = dpsi_total(F, psi, params)
    out["dpsi_total"] = _rel(fd, an, np.abs(an) + 1.0)

    # viscous stress in the rate argument
    Fdot = rng.standard_normal((d, d, samples))
    _, vstress = viscous_eval(F, Fdot, psi, params)
    E = unit((d, d, samples))
    fd = (
        viscous_eval(F, Fdot + h * E, psi, params)[0]
        - viscous_eval(F, Fdot - h * E, psi, params)[0]
    ) / (2 * h)
    an = tensors.ddot(vstress, E)
    out["viscous_stress"] = _rel(fd, an, tensors.frob(vstress, 2))

    return out


def frame_indifference_residuals(
    params: PotentialParams, samples: int = 10000, seed: int = 0
) -> dict[str, float]:
    """Static and dynamic invariance under proper rotations.

    Static: the stored potentials must not move when the deformation
    (or its second gradient) is rotated from the left.  Dynamic: the
    viscous potential must not move under a time-dependent rotation,
    realized as F -> R F, Fdot -> R (Fdot + Omega F) with Omega skew.
    Residuals are |difference| / (1 + |value|).
    """
    rng = np.random.default_rng(seed)
    d = params.d
    R = random_rotations(d, samples, rng)

    A = random_invertible(d, samples, rng)
    val, _ = wel_eval(A, params)
    val_rot, _ = wel_eval(tensors.matmul(R, A), params)
    static = float(np.max(np.abs(val_rot - val) / (1.0 + np.abs(val))))

    G = 0.8 * rng.standard_normal((d, d, d, samples))
    val = why_eval(G, params)[0]
    G_rot = np.einsum("ia...,ajk...->ijk...", R, G)
    val_rot = why_eval(G_rot, params)[0]
    static = max(static, float(np.max(np.abs(val_rot - val) / (1.0 + np.abs(val)))))

    psi = rng.uniform(-1.4, 1.4, samples)
    gpsi = 0.8 * rng.standard_normal((d, samples))
    val = wpf_eval(psi, gpsi, A, params)[0]
    val_rot = wpf_eval(psi, gpsi, tensors.matmul(R, A), params)[0]
    static = max(static, float(np.max(np.abs(val_rot - val) / (1.0 + np.abs(val)))))

    Fdot = rng.standard_normal((d, d, samples))
    W = rng.standard_normal((d, d, samples))
    Omega = 0.5 * (W - tensors.transpose(W))
    val = viscous_eval(A, Fdot, psi, params)[0]
    F_rot = tensors.matmul(R, A)
    Fdot_rot = tensors.matmul(R, Fdot + tensors.matmul(Omega, A))
    val_rot = viscous_eval(F_rot, Fdot_rot, psi, params)[0]
    dynamic = float(np.max(np.abs(val_rot - val) / (1.0 + np.abs(val))))

    return {"static": static, "dynamic": dynamic}


def dense_poisson_mismatch(n: int = 9, d: int = 2, seed: int = 0) -> float:
    """Max-norm gap between the iterative solve and a dense
    eigendecomposition pseudoinverse on the same operator."""
    grid = Grid(d, n)
    lap = NeumannLaplacian(grid)
    rng = np.random.default_rng(seed)
    rhs = rng.standard_normal(grid.shape)
    rhs -= grid.mean(rhs)

    u_iter = solve_poisson_meanfree(lap, rhs)

    A = lap.A.toarray()
    evals, evecs = np.linalg.eigh(A)
    cutoff = 1e-10 * evals.max()
    inv = np.where(evals > cutoff, 1.0 / np.maximum(evals, cutoff), 0.0)
    w_rhs = grid.weights.reshape(-1) * rhs.reshape(-1)
    u_dense = evecs @ (inv * (evecs.T @ w_rhs))
    u_dense = u_dense.reshape(grid.shape)
    u_dense = u_dense - grid.mean(u_dense)

    return float(np.max(np.abs(u_iter - u_dense)))


def vnorm_refinement(n_list=(9, 17, 33), d: int = 2) -> tuple[list[float], list[float]]:
    """Squared dual norm of cos(pi x_0) on a refinement ladder.

    Returns the computed values and the observed convergence orders of
    their errors against the continuum limit 1/(2 pi^2).
    """
    exact = 1.0 / (2.0 * math.pi**2)
    values = []
    for n in n_list:
        grid = Grid(d, n)
        lap = NeumannLaplacian(grid)
        phi = np.cos(math.pi * grid.coords[0])
        phi -= grid.mean(phi)
        values.append(hminus_norm_sq(lap, phi))
    errors = [abs(v - exact) for v in values]
    orders = [
        math.log2(errors[k] / errors[k + 1]) if errors[k + 1] > 0 else math.inf
        for k in range(len(errors) - 1)
    ]
    return values, orders


def smooth_vector_field(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Low-frequency random vector field vanishing on the Dirichlet set."""
    x0 = grid.coords[0]
    if grid.dirichlet == "min":
        bubble = x0.copy()
    elif grid.dirichlet == "max":
        bubble = 1.0 - x0
    elif grid.dirichlet == "both":
        bubble = x0 * (1.0 - x0)
    else:
        bubble = np.ones(grid.shape)
        for a in range(grid.d):
            bubble = bubble * grid.coords[a] * (1.0 - grid.coords[a])
    out = np.zeros((grid.d,) + grid.shape)
    for i in range(grid.d):
        f = np.ones(grid.shape)
        for a in range(grid.d):
            k = int(rng.integers(1, 3))
            phase = rng.uniform(0.0, 2.0 * math.pi)
            f = f * np.cos(math.pi * k * grid.coords[a] + phase)
        out[i] = bubble * f
    return out


def random_admissible_state(
    grid: Grid,
    family: DirichletFamily,
    params: PotentialParams,
    rng: np.random.Generator,
    magnitude: float = 0.05,
    max_tries: int = 30,
):
    """A previous/current state pair safe for the incremental problem.

    Both deformations are identity plus a pinned smooth perturbation
    with nodal det(grad y) >= 0.2 after composition; the concentration
    pair shares its trapezoid mean exactly so the mass guard accepts
    it.  Returns (t, y_prev, psi_prev, y, psi).
    """
    t = float(rng.uniform(0.3, 0.9)) * family.horizon

    def draw_y(mag):
        for _ in range(max_tries):
            y = grid.identity_map() + mag * smooth_vector_field(grid, rng)
            y[:, grid.dirichlet_mask] = grid.coords[:, grid.dirichlet_mask]
            bundle = compose_deformation(family, t, grid, y)
            if float(tensors.mat_det(bundle.F).min()) > 0.2:
                return y
            mag *= 0.5
        raise RuntimeError("could not draw an admissible deformation")

    y_prev = draw_y(magnitude)
    y = draw_y(magnitude)

    mean = float(rng.uniform(-0.05, 0.05))
    def draw_psi():
        psi = 0.3 * smooth_vector_field(grid, rng)[0]
        psi += mean - grid.mean(psi)
        return psi

    return t, y_prev, draw_psi(), y, draw_psi()


def incremental_fd_residual(
    problem: IncrementProblem,
    y: np.ndarray,
    psi: np.ndarray,
    rng: np.random.Generator,
    num_dirs: int = 20,
    h: float = 1e-6,
) -> float:
    """Directional finite differences of the incremental functional
    against its assembled gradient; returns the worst relative error."""
    grid = problem.grid
    f, gy, gpsi = problem.value_and_grad(y, psi)
    gnorm = math.sqrt(float(np.sum(gy * gy) + np.sum(gpsi * gpsi)))
    worst = 0.0
    for _ in range(num_dirs):
        dy = rng.standard_normal(y.shape)
        dy[:, grid.dirichlet_mask] = 0.0
        dpsi = rng.standard_normal(psi.shape)
        dpsi -= grid.mean(dpsi)
        norm = math.sqrt(float(np.sum(dy * dy) + np.sum(dpsi * dpsi)))
        dy, dpsi = dy / norm, dpsi / norm
        an = float(np.sum(gy * dy) + np.sum(gpsi * dpsi))
        fd = (
            problem.value(y + h * dy, psi + h * dpsi)
            - problem.value(y - h * dy, psi - h * dpsi)
        ) / (2 * h)
        rel = abs(fd - an) / max(abs(an), 1e-6 * gnorm, _TINY)
        worst = max(worst, rel)
    return worst
