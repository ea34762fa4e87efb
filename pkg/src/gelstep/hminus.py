"""Discrete H^-1 metric on mean-free fields via a Neumann Laplacian.

The inner product of two mean-free fields phi_1, phi_2 is

    <phi_1, phi_2> = integral grad(u_1) . grad(u_2) dx,   -Lap u_i = phi_i,

with homogeneous Neumann conditions and mean-free potentials u_i.  The
discrete realization assembles the stiffness bilinear form

    B(u, v) = sum_axes sum_edges (1/h) (u_+ - u_-)(v_+ - v_-) * w_transverse

as a sparse matrix A (Kronecker products of a 1D edge-difference
stiffness with 1D trapezoid mass factors).  A is symmetric positive
semidefinite with kernel exactly the constants, row sums zero, and
W^-1 A reproduces the classic reflecting 5-point (2D) / 7-point (3D)
Laplacian stencil, where W is the diagonal trapezoid mass matrix.

Solving A u = W phi makes B(u, v) = integral phi v hold for every
discrete v up to solver tolerance, so the identity

    <phi_1, phi_2> = u_1^T A u_2 = integral phi_1 u_2

is exact by construction rather than only up to O(h^2) discretization
mismatch.  That identity is what the energy ledger and the weak-form
residual checks rely on.

The linear solves use conjugate gradients with Jacobi preconditioning.
The constant kernel direction is projected out of every preconditioned
residual and iterate to stop it from drifting back in.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .errors import NotMeanFree, SolverStagnation
from .grid import Grid

MEANFREE_RTOL = 1e-10
SELFCHECK_RTOL = 1e-8
DEFAULT_RTOL = 1e-13


class NeumannLaplacian:
    """Stiffness-form realization of -Laplacian with Neumann conditions.

    Attributes
    ----------
    A : scipy.sparse.csr_matrix
        Symmetric PSD stiffness matrix, kernel = constants.
    w_flat : ndarray
        Flattened trapezoid weights (diagonal of the mass matrix).
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        n, h, d = grid.n, grid.h, grid.d

        main = np.full(n, 2.0 / h)
        main[0] = main[-1] = 1.0 / h
        off = np.full(n - 1, -1.0 / h)
        K1 = sparse.diags([off, main, off], [-1, 0, 1], format="csr")
        W1 = sparse.diags(grid.weights_1d, format="csr")

        A = None
        for j in range(d):
            factors = [W1] * d
            factors[j] = K1
            term = factors[0]
            for fac in factors[1:]:
                term = sparse.kron(term, fac, format="csr")
            A = term if A is None else A + term
        self.A = A.tocsr()
        self.w_flat = grid.weights.reshape(-1)
        self.jacobi_inv = 1.0 / self.A.diagonal()
        self.iter_budget = 10 * grid.num_nodes
        self._warm: dict[str, np.ndarray] = {}


def _project_ones(x: np.ndarray) -> np.ndarray:
    """Remove the Euclidean mean (A's kernel is the constant vector)."""
    x -= x.mean()
    return x


def solve_poisson_meanfree(
    lap: NeumannLaplacian,
    rhs: np.ndarray,
    rtol: float = DEFAULT_RTOL,
    warm_key: str | None = None,
) -> np.ndarray:
    """Solve -Lap u = rhs with Neumann conditions and mean-free u.

    The right-hand side must be mean-free: |integral rhs| must not
    exceed 1e-10 * ||rhs||_L2, otherwise NotMeanFree is raised.  The
    returned potential satisfies ||A u - W rhs|| <= rtol * ||W rhs||
    (Euclidean norms) and has vanishing trapezoid mean.  Exceeding the
    iteration budget of 10 * num_nodes raises SolverStagnation.

    `warm_key` names a slot for warm starting: repeated solves with the
    same key reuse the previous solution as initial guess, which is the
    common case inside time stepping and line searches.
    """
    grid = lap.grid
    phi = np.asarray(rhs, dtype=float).reshape(-1)
    mass = float(grid.integrate(rhs))
    l2 = float(np.sqrt(grid.integrate(np.asarray(rhs, dtype=float) ** 2)))
    if l2 == 0.0:
        return np.zeros(grid.shape)
    if abs(mass) > MEANFREE_RTOL * l2:
        raise NotMeanFree(
            f"right-hand side has mean {mass:.3e} "
            f"(allowed {MEANFREE_RTOL * l2:.3e} at ||rhs||={l2:.3e})"
        )

    b = lap.w_flat * phi
    _project_ones(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(grid.shape)

    x = lap._warm.get(warm_key)
    if x is None or warm_key is None:
        x = np.zeros_like(b)
    else:
        x = x.copy()

    A = lap.A
    r = b - A @ x
    _project_ones(r)
    z = lap.jacobi_inv * r
    _project_ones(z)
    p = z.copy()
    rz = float(r @ z)
    tol = rtol * bnorm

    it = 0
    resid = float(np.linalg.norm(r))
    while resid > tol:
        if it >= lap.iter_budget:
            raise SolverStagnation(
                f"Poisson solve stalled: residual {resid:.3e} > {tol:.3e} "
                f"after {it} iterations (budget {lap.iter_budget})"
            )
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        _project_ones(x)
        _project_ones(r)
        z = lap.jacobi_inv * r
        _project_ones(z)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        resid = float(np.linalg.norm(r))
        it += 1

    if warm_key is not None:
        lap._warm[warm_key] = x.copy()

    u = x.reshape(grid.shape)
    u = u - grid.mean(u)
    return u


def stiffness_form(lap: NeumannLaplacian, u: np.ndarray, v: np.ndarray) -> float:
    """Evaluate the discrete Dirichlet form B(u, v) ~ integral grad u . grad v."""
    return float(u.reshape(-1) @ (lap.A @ v.reshape(-1)))


def hminus_inner(
    lap: NeumannLaplacian,
    phi1: np.ndarray,
    phi2: np.ndarray,
    warm_keys: tuple[str | None, str | None] = (None, None),
) -> float:
    """H^-1 inner product of two mean-free fields.

    Computes B(u_1, u_2) with -Lap u_i = phi_i and cross-checks it
    against integral phi_1 u_2 dx; a relative mismatch beyond 1e-8
    means the Poisson solves silently lost accuracy and raises
    SolverStagnation.
    """
    grid = lap.grid
    u1 = solve_poisson_meanfree(lap, phi1, warm_key=warm_keys[0])
    u2 = solve_poisson_meanfree(lap, phi2, warm_key=warm_keys[1])
    val = stiffness_form(lap, u1, u2)
    check = float(grid.integrate(np.asarray(phi1, dtype=float) * u2))
    # scale by the Cauchy-Schwarz bound so near-orthogonal fields do not
    # turn solver noise into a spurious relative error
    scale = np.sqrt(
        max(stiffness_form(lap, u1, u1), 0.0) * max(stiffness_form(lap, u2, u2), 0.0)
    )
    if abs(val - check) > SELFCHECK_RTOL * max(scale, 1e-300):
        raise SolverStagnation(
            f"H^-1 inner product self-check failed: form value {val:.12e} "
            f"vs duality value {check:.12e} "
            f"(diff {abs(val - check):.3e}, allowed {SELFCHECK_RTOL * scale:.3e})"
        )
    return val


def hminus_norm_sq(
    lap: NeumannLaplacian, phi: np.ndarray, warm_key: str | None = None
) -> float:
    """Squared H^-1 norm of a mean-free field (single Poisson solve)."""
    grid = lap.grid
    u = solve_poisson_meanfree(lap, phi, warm_key=warm_key)
    return float(grid.integrate(np.asarray(phi, dtype=float) * u))
