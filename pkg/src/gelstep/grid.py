"""Uniform tensor-product grid on the unit square/cube with finite differences.

The reference domain is (0,1)^d discretized with n nodes per axis,
spacing h = 1/(n-1).  All fields live on nodes:

* scalar fields have shape ``(n,)*d``,
* vector fields ``(d,) + (n,)*d``,
* matrix fields ``(d, d) + (n,)*d`` (component axes first).

Differentiation uses the standard second-order stencil: central
differences in the interior and one-sided three-point formulas at the
boundary, realized as a dense 1D operator matrix applied along each
grid axis.  The operator is exact on quadratics, including boundary
rows, and its transpose is available for adjoint (gradient) assembly.

Integration is tensor-product trapezoid quadrature.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse


_DIRICHLET_MODES = ("min", "max", "both", "all")


def _derivative_matrix(n: int, h: float) -> np.ndarray:
    """Dense second-order first-derivative matrix on n uniform nodes."""
    D = np.zeros((n, n))
    inv2h = 1.0 / (2.0 * h)
    # one-sided rows: f'(x0) ~ (-3 f0 + 4 f1 - f2) / 2h
    D[0, 0], D[0, 1], D[0, 2] = -3.0 * inv2h, 4.0 * inv2h, -1.0 * inv2h
    D[-1, -1], D[-1, -2], D[-1, -3] = 3.0 * inv2h, -4.0 * inv2h, 1.0 * inv2h
    for i in range(1, n - 1):
        D[i, i - 1] = -inv2h
        D[i, i + 1] = inv2h
    return D


class Grid:
    """Uniform grid on (0,1)^d together with difference and quadrature ops.

    Parameters
    ----------
    d : int
        Spatial dimension, 2 or 3.
    n : int
        Nodes per axis, at least 5 (the one-sided stencils need 3 nodes
        and the interior should be nonempty).
    dirichlet : str
        Which faces carry the time-dependent Dirichlet condition:
        ``"min"`` (x1 = 0), ``"max"`` (x1 = 1), ``"both"`` (default), or
        ``"all"`` (entire boundary).
    """

    def __init__(self, d: int, n: int, dirichlet: str = "both"):
        if d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {d}")
        if n < 5:
            raise ValueError(f"need at least 5 nodes per axis, got {n}")
        if dirichlet not in _DIRICHLET_MODES:
            raise ValueError(
                f"dirichlet must be one of {_DIRICHLET_MODES}, got {dirichlet!r}"
            )
        self.d = d
        self.n = n
        self.h = 1.0 / (n - 1)
        self.shape = (n,) * d
        self.num_nodes = n**d
        self.dirichlet = dirichlet

        axes = [np.linspace(0.0, 1.0, n) for _ in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.coords = np.stack(mesh)  # (d,) + shape

        w1 = np.full(n, self.h)
        w1[0] *= 0.5
        w1[-1] *= 0.5
        self.weights_1d = w1
        W = w1
        for _ in range(d - 1):
            W = np.multiply.outer(W, w1)
        self.weights = W  # shape == self.shape
        self.volume = float(self.weights.sum())

        self.deriv_1d = _derivative_matrix(n, self.h)
        self.deriv_1d_T = self.deriv_1d.T.copy()

        mask = np.zeros(self.shape, dtype=bool)
        if dirichlet == "all":
            for ax in range(d):
                mask[(slice(None),) * ax + (0,)] = True
                mask[(slice(None),) * ax + (n - 1,)] = True
        else:
            if dirichlet in ("min", "both"):
                mask[0] = True
            if dirichlet in ("max", "both"):
                mask[n - 1] = True
        self.dirichlet_mask = mask

    # -- differentiation ------------------------------------------------

    def apply_d(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Differentiate field f along grid axis `axis` (trailing d axes)."""
        full_axis = f.ndim - self.d + axis
        g = np.moveaxis(f, full_axis, -1)
        # (g @ D^T)[..., i] = sum_j D[i, j] g[..., j], batched by matmul
        return np.moveaxis(g @ self.deriv_1d_T, -1, full_axis)

    def sparse_derivative(self, axis: int) -> sparse.csr_matrix:
        """Global derivative along one axis as a sparse matrix acting on
        flattened scalar fields (row-major).  Cached per axis; used for
        assembling preconditioner operators, not for differentiation."""
        cache = getattr(self, "_sparse_d", None)
        if cache is None:
            cache = self._sparse_d = {}
        if axis not in cache:
            D1 = sparse.csr_matrix(self.deriv_1d)
            eye = sparse.identity(self.n, format="csr")
            op = None
            for j in range(self.d):
                fac = D1 if j == axis else eye
                op = fac if op is None else sparse.kron(op, fac, format="csr")
            cache[axis] = op
        return cache[axis]

    def apply_dt(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Apply the transpose of the derivative operator along `axis`."""
        full_axis = f.ndim - self.d + axis
        g = np.moveaxis(f, full_axis, -1)
        return np.moveaxis(g @ self.deriv_1d, -1, full_axis)

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Nodal gradient; the derivative axis is appended after existing
        component axes.  A scalar field (n,)*d maps to (d,)+(n,)*d, a
        vector field (d,)+(n,)*d to (d,d)+(n,)*d with grad[a, j] = D_j f_a.
        """
        comp = f.ndim - self.d
        out = np.empty(f.shape[:comp] + (self.d,) + self.shape)
        for j in range(self.d):
            out[(slice(None),) * comp + (j,)] = self.apply_d(f, j)
        return out

    def hess(self, f: np.ndarray) -> np.ndarray:
        """Nodal Hessian: hess[..., j, k] = D_k D_j f.  Because the 1D
        operators along distinct axes commute exactly, the result is
        symmetric in (j, k) to rounding.
        """
        return self.grad(self.grad(f))

    # -- quadrature -----------------------------------------------------

    def integrate(self, f: np.ndarray) -> np.ndarray:
        """Trapezoid integral over the trailing d axes."""
        axes = tuple(range(f.ndim - self.d, f.ndim))
        return np.tensordot(f, self.weights, axes=(axes, tuple(range(self.d))))

    def mean(self, f: np.ndarray) -> np.ndarray:
        return self.integrate(f) / self.volume

    def project_meanfree(self, f: np.ndarray) -> np.ndarray:
        """Remove the weighted mean so the trapezoid integral vanishes."""
        return f - self.mean(f)

    # -- geometry helpers ------------------------------------------------

    def identity_map(self) -> np.ndarray:
        """The identity deformation y(x) = x as a vector field."""
        return self.coords.copy()

    def zero_dirichlet(self, f: np.ndarray) -> np.ndarray:
        """Return a copy of a vector field with Dirichlet nodes zeroed."""
        out = f.copy()
        out[(slice(None),) + np.nonzero(self.dirichlet_mask)] = 0.0
        return out

    def set_dirichlet(self, f: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Return a copy of f with Dirichlet nodes replaced by `values`."""
        out = f.copy()
        idx = (slice(None),) + np.nonzero(self.dirichlet_mask)
        out[idx] = values[idx]
        return out
