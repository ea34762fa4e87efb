"""Time-dependent Dirichlet distortions and their composition with states.

The boundary drive is a family of diffeomorphisms vD(t, .) of the
ambient space.  The state seen by the energy is the composition
v(t, x) = vD(t, y(x)), so the deformation gradient and its gradient are

    F_ij     = sum_a J_ia X_aj,
    (dF)_ijk = sum_ab H_iab X_aj X_bk + sum_a J_ia Y_ajk,

with J = grad_y vD, H = grad_y^2 vD evaluated at y(x), and X = grad y,
Y = grad^2 y the nodal derivatives of the argument.  Differentiating
the energy with respect to nodal y values makes H(y(x)) itself depend
on y, which is why each family also provides the third y-derivative.

Every family exposes seven closed-form evaluations

    value, jac, hess, third, dt_value, dt_jac, dt_hess

and is checked against central finite differences at construction, so
a mistyped derivative cannot silently corrupt downstream gradients.
Positivity of det(jac) is verified on the same sample cloud and the
largest |jac^-1| entry norm is recorded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid import Grid
from . import tensors

_FD_EPS = 1e-6
_FD_TOL = 1e-6


class DirichletFamily:
    """Base class for the boundary distortion vD(t, y).

    All evaluation methods take y with shape (d,) + S for an arbitrary
    trailing point shape S and return arrays whose derivative axes
    follow the component axis: jac[i, a] = d v_i / d y_a and so on.
    Concrete families call `_validate()` at the end of their
    constructor.
    """

    def __init__(self, d: int, horizon: float):
        if d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {d}")
        if horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        self.d = d
        self.horizon = horizon
        self.sup_jac_inv = 0.0

    # concrete families implement these seven
    def value(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jac(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def third(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dt_value(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dt_jac(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dt_hess(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- construction-time consistency check ------------------------------

    def _validate(self, samples: int = 40, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        d = self.d
        y = rng.uniform(-0.1, 1.1, size=(d, samples))
        t_values = np.linspace(0.0, self.horizon, 7)

        def check(name, got, ref):
            scale = max(1.0, float(np.max(np.abs(ref))))
            err = float(np.max(np.abs(got - ref))) / scale
            if err > _FD_TOL:
                raise ValidationError(
                    f"{type(self).__name__}: closed-form {name} disagrees with "
                    f"finite differences (rel error {err:.3e} > {_FD_TOL:.1e})"
                )

        sup_inv = 0.0
        for t in t_values:
            # spatial chain: value -> jac -> hess -> third
            for lower, upper, name in (
                (self.value, self.jac, "jac"),
                (self.jac, self.hess, "hess"),
                (self.hess, self.third, "third"),
            ):
                fd = []
                for a in range(d):
                    yp = y.copy()
                    ym = y.copy()
                    yp[a] += _FD_EPS
                    ym[a] -= _FD_EPS
                    fd.append((lower(t, yp) - lower(t, ym)) / (2 * _FD_EPS))
                # FD axis comes last among derivative axes
                fd = np.stack(fd, axis=lower(t, y).ndim - 1)
                check(name, upper(t, y), fd)

            # time chain at fixed y
            dt = min(_FD_EPS, 0.25 * self.horizon)
            tp, tm = t + dt, t - dt
            for fun, dfun, name in (
                (self.value, self.dt_value, "dt_value"),
                (self.jac, self.dt_jac, "dt_jac"),
                (self.hess, self.dt_hess, "dt_hess"),
            ):
                fd = (fun(tp, y) - fun(tm, y)) / (2 * dt)
                check(name, dfun(t, y), fd)

            J = self.jac(t, y)
            Jinv, det = tensors.mat_inv_det(J)
            if np.any(det <= 0.0):
                raise ValidationError(
                    f"{type(self).__name__}: jacobian determinant nonpositive "
                    f"(min {float(det.min()):.3e} at t={t:.3g})"
                )
            sup_inv = max(sup_inv, float(tensors.frob(Jinv, 2).max()))
        self.sup_jac_inv = sup_inv


class IdentityFamily(DirichletFamily):
    """No boundary motion: vD(t, y) = y."""

    def __init__(self, d: int = 2, horizon: float = 1.0):
        super().__init__(d, horizon)
        self._validate()

    def value(self, t, y):
        return np.array(y, dtype=float, copy=True)

    def jac(self, t, y):
        d = self.d
        J = np.zeros((d, d) + np.shape(y)[1:])
        for i in range(d):
            J[i, i] = 1.0
        return J

    def hess(self, t, y):
        d = self.d
        return np.zeros((d, d, d) + np.shape(y)[1:])

    def third(self, t, y):
        d = self.d
        return np.zeros((d, d, d, d) + np.shape(y)[1:])

    def dt_value(self, t, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def dt_jac(self, t, y):
        d = self.d
        return np.zeros((d, d) + np.shape(y)[1:])

    def dt_hess(self, t, y):
        d = self.d
        return np.zeros((d, d, d) + np.shape(y)[1:])


class AffineFamily(DirichletFamily):
    """Affine ramp vD(t, y) = (I + t R) y + t s.

    `rate` is the d x d distortion rate R, `shift_rate` the translation
    velocity s.  Invertibility of I + t R over [0, horizon] is verified
    at construction.
    """

    def __init__(
        self,
        rate: np.ndarray,
        shift_rate: np.ndarray | None = None,
        d: int = 2,
        horizon: float = 1.0,
    ):
        super().__init__(d, horizon)
        R = np.asarray(rate, dtype=float)
        if R.shape != (d, d):
            raise ValueError(f"rate must have shape ({d}, {d}), got {R.shape}")
        self.rate = R
        if shift_rate is None:
            self.shift_rate = np.zeros(d)
        else:
            s = np.asarray(shift_rate, dtype=float)
            if s.shape != (d,):
                raise ValueError(f"shift_rate must have shape ({d},), got {s.shape}")
            self.shift_rate = s
        self._validate()

    def _matrix(self, t):
        return np.eye(self.d) + t * self.rate

    def value(self, t, y):
        A = self._matrix(t)
        b = t * self.shift_rate
        out = np.einsum("ia,a...->i...", A, np.asarray(y, dtype=float))
        return out + b.reshape((self.d,) + (1,) * (out.ndim - 1))

    def jac(self, t, y):
        A = self._matrix(t)
        tail = np.shape(y)[1:]
        return np.broadcast_to(
            A.reshape((self.d, self.d) + (1,) * len(tail)), (self.d, self.d) + tail
        ).copy()

    def hess(self, t, y):
        d = self.d
        return np.zeros((d, d, d) + np.shape(y)[1:])

    def third(self, t, y):
        d = self.d
        return np.zeros((d, d, d, d) + np.shape(y)[1:])

    def dt_value(self, t, y):
        out = np.einsum("ia,a...->i...", self.rate, np.asarray(y, dtype=float))
        return out + self.shift_rate.reshape((self.d,) + (1,) * (out.ndim - 1))

    def dt_jac(self, t, y):
        tail = np.shape(y)[1:]
        return np.broadcast_to(
            self.rate.reshape((self.d, self.d) + (1,) * len(tail)),
            (self.d, self.d) + tail,
        ).copy()

    def dt_hess(self, t, y):
        d = self.d
        return np.zeros((d, d, d) + np.shape(y)[1:])


class GentleBendFamily(DirichletFamily):
    """Shear-like bending ramp

        vD(t, y)_0 = y_0 + t * amplitude * sin(pi * frequency * y_1),
        vD(t, y)_j = y_j  for j >= 1.

    The jacobian is unit upper triangular, so det(jac) = 1 and the map
    is globally invertible for every amplitude.
    """

    def __init__(
        self,
        amplitude: float,
        frequency: float = 1.0,
        d: int = 2,
        horizon: float = 1.0,
    ):
        super().__init__(d, horizon)
        if frequency <= 0.0:
            raise ValueError(f"frequency must be positive, got {frequency}")
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self._k = np.pi * self.frequency
        self._validate()

    def value(self, t, y):
        out = np.array(y, dtype=float, copy=True)
        out[0] += t * self.amplitude * np.sin(self._k * np.asarray(y)[1])
        return out

    def jac(self, t, y):
        d, k = self.d, self._k
        tail = np.shape(y)[1:]
        J = np.zeros((d, d) + tail)
        for i in range(d):
            J[i, i] = 1.0
        J[0, 1] = t * self.amplitude * k * np.cos(k * np.asarray(y)[1])
        return J

    def hess(self, t, y):
        d, k = self.d, self._k
        H = np.zeros((d, d, d) + np.shape(y)[1:])
        H[0, 1, 1] = -t * self.amplitude * k**2 * np.sin(k * np.asarray(y)[1])
        return H

    def third(self, t, y):
        d, k = self.d, self._k
        T = np.zeros((d, d, d, d) + np.shape(y)[1:])
        T[0, 1, 1, 1] = -t * self.amplitude * k**3 * np.cos(k * np.asarray(y)[1])
        return T

    def dt_value(self, t, y):
        d = self.d
        out = np.zeros((d,) + np.shape(y)[1:])
        out[0] = self.amplitude * np.sin(self._k * np.asarray(y)[1])
        return out

    def dt_jac(self, t, y):
        d, k = self.d, self._k
        J = np.zeros((d, d) + np.shape(y)[1:])
        J[0, 1] = self.amplitude * k * np.cos(k * np.asarray(y)[1])
        return J

    def dt_hess(self, t, y):
        d, k = self.d, self._k
        H = np.zeros((d, d, d) + np.shape(y)[1:])
        H[0, 1, 1] = -self.amplitude * k**2 * np.sin(k * np.asarray(y)[1])
        return H


def make_family(kind: str, d: int, horizon: float, **params) -> DirichletFamily:
    """Build a distortion family by name: identity, affine, gentle_bend."""
    if kind == "identity":
        return IdentityFamily(d=d, horizon=horizon)
    if kind == "affine":
        return AffineFamily(d=d, horizon=horizon, **params)
    if kind == "gentle_bend":
        return GentleBendFamily(d=d, horizon=horizon, **params)
    raise ValueError(f"unknown distortion family {kind!r}")


@dataclass
class DeformationBundle:
    """Composed kinematics at one time level.

    X, Y are the nodal gradient and Hessian of y; J, H, T3 the first
    three y-derivatives of the distortion at y(x); F and G the composed
    deformation gradient and its gradient.
    """

    t: float
    v: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    J: np.ndarray
    H: np.ndarray
    T3: np.ndarray
    F: np.ndarray
    G: np.ndarray


def compose_deformation(
    family: DirichletFamily, t: float, grid: Grid, y: np.ndarray
) -> DeformationBundle:
    """Evaluate v = vD(t, y(.)) together with F, grad F and the chain
    factors needed for exact differentiation with respect to y."""
    X = grid.grad(y)
    Y = grid.hess(y)
    J = family.jac(t, y)
    H = family.hess(t, y)
    T3 = family.third(t, y)
    v = family.value(t, y)
    F = np.einsum("ia...,aj...->ij...", J, X)
    G = np.einsum("iab...,aj...,bk...->ijk...", H, X, X) + np.einsum(
        "ia...,ajk...->ijk...", J, Y
    )
    return DeformationBundle(t=float(t), v=v, X=X, Y=Y, J=J, H=H, T3=T3, F=F, G=G)


def external_power_fields(
    family: DirichletFamily, t: float, grid: Grid, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Partial time derivatives of F and grad F at frozen y.

    Returns (dtF, dtG) with dtF_ij = sum_a dtJ_ia X_aj and
    dtG_ijk = sum_ab dtH_iab X_aj X_bk + sum_a dtJ_ia Y_ajk.
    """
    X = grid.grad(y)
    Y = grid.hess(y)
    dtJ = family.dt_jac(t, y)
    dtH = family.dt_hess(t, y)
    dtF = np.einsum("ia...,aj...->ij...", dtJ, X)
    dtG = np.einsum("iab...,aj...,bk...->ijk...", dtH, X, X) + np.einsum(
        "ia...,ajk...->ijk...", dtJ, Y
    )
    return dtF, dtG


@dataclass
class SmallnessReport:
    """Advisory check that the boundary distortion stays gentle."""

    sup_hess: float
    lhs: float
    delta0: float
    passed: bool

    def summary(self) -> str:
        verdict = "ok" if self.passed else "exceeded"
        return (
            f"distortion smallness {verdict}: (gamma/alpha) sup|D^2 vD|^beta "
            f"= {self.lhs:.6e} vs delta0 = {self.delta0:.6e}"
        )


def smallness_check(
    family: DirichletFamily,
    gamma: float,
    alpha: float,
    beta: float,
    delta0: float = 0.1,
    samples: int = 200,
    seed: int = 0,
) -> SmallnessReport:
    """Sample sup |D^2 vD| over time and space and compare the scaled
    power (gamma/alpha) sup^beta against the smallness budget delta0.
    Advisory: callers warn on failure rather than abort."""
    rng = np.random.default_rng(seed)
    y = rng.uniform(-0.1, 1.1, size=(family.d, samples))
    sup = 0.0
    for t in np.linspace(0.0, family.horizon, 9):
        H = family.hess(t, y)
        sup = max(sup, float(tensors.frob(H, 3).max()))
    lhs = (gamma / alpha) * sup**beta
    return SmallnessReport(sup_hess=sup, lhs=lhs, delta0=delta0, passed=lhs <= delta0)
