"""Energy densities, stresses, and the swelling ramp.

Model ingredients, all vectorized over trailing node axes:

* elastic density  wel(A)  = (alpha/p)|A|^p + (c_det/q) det(A)^(-q)
* hyper density    why(G)  = (gamma/beta)|G|^beta           (G third-order)
* phase density    wpf     = (a_dw/4)(psi^2-1)^2 + (b_kw/2)|F^-T grad_psi|^2
* viscous rate     V       = 1/2 Cdot : D Cdot,   Cdot = Fdot^T F + F^T Fdot
* swelling ramp    g(z)    : 1 + g_slope*z on [-1,1], constant plateaus
                             g_hi / g_lo outside, C^1 monotone cubic blends
                             on the transition bands of width g_delta.

The elastic energy of a swollen state is wel(Fe) with Fe = F / g(psi); its
psi-derivative is -dA_wel(Fe):F * g'(psi)/g(psi)^2 (chain rule through the
1/g factor), exposed as dpsi_total together with the double-well derivative.

All analytic derivatives here are guarded by finite-difference oracles in the
test suite; do not "simplify" a formula without re-running those.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonpositiveDeterminant, ValidationError
from .tensors import ddot, frob, mat_det, mat_inv_det, matmul, matvec, transpose


@dataclass(frozen=True)
class PotentialParams:
    """All model constants plus the spatial dimension they must satisfy.

    The exponent chain p >= 2*beta, beta > d, q >= beta*d/(beta-d) is what the
    existence theory needs (compact embeddings plus determinant control); the
    constructor rejects violations outright rather than letting a run produce
    meaningless output.
    """

    d: int = 2
    alpha: float = 1.0
    p: float = 6.0
    c_det: float = 4.0
    q: float = 6.0
    gamma: float = 1.0
    beta: float = 3.0
    a_dw: float = 1.0
    b_kw: float = 0.01
    eta_visc: float = 0.1
    g_slope: float = 0.2
    g_lo: float = 0.7
    g_hi: float = 1.3
    g_delta: float = 0.5
    # Optional override for the viscosity tensor: callable (C, psi, Cdot) ->
    # D(C,psi)Cdot acting on symmetric matrices. None means eta_visc * Cdot.
    viscous_tensor: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValidationError(f"d must be 2 or 3, got {self.d}")
        for name in ("alpha", "c_det", "gamma", "a_dw", "b_kw", "eta_visc", "g_slope", "g_delta"):
            v = getattr(self, name)
            if not (v > 0) or not np.isfinite(v):
                raise ValidationError(f"{name} must be positive and finite, got {v}")
        for name in ("p", "q", "beta"):
            v = getattr(self, name)
            if not (v > 1) or not np.isfinite(v):
                raise ValidationError(f"{name} must exceed 1, got {v}")
        if not self.beta > self.d:
            raise ValidationError(
                f"exponent chain violated: beta = {self.beta} must exceed d = {self.d}"
            )
        if not self.p >= 2 * self.beta:
            raise ValidationError(
                f"exponent chain violated: p = {self.p} must be >= 2*beta = {2 * self.beta}"
            )
        q_min = self.beta * self.d / (self.beta - self.d)
        if not self.q >= q_min:
            raise ValidationError(
                f"exponent chain violated: q = {self.q} must be >= beta*d/(beta-d) = {q_min}"
            )
        if not (0 < self.g_lo < 1 < self.g_hi):
            raise ValidationError(
                f"ramp plateaus must satisfy 0 < g_lo < 1 < g_hi, got {self.g_lo}, {self.g_hi}"
            )
        if 1 + self.g_slope > self.g_hi or 1 - self.g_slope < self.g_lo:
            raise ValidationError(
                "ramp leaves the plateau range: need g_lo <= 1-g_slope and 1+g_slope <= g_hi"
            )
        # Monotonicity of the cubic Hermite blends (Fritsch-Carlson box): the
        # end slope may not exceed three times the secant slope of the band.
        up = 3.0 * (self.g_hi - 1.0 - self.g_slope)
        dn = 3.0 * (1.0 - self.g_slope - self.g_lo)
        if self.g_slope * self.g_delta > up + 1e-15 or self.g_slope * self.g_delta > dn + 1e-15:
            raise ValidationError(
                "no monotone C^1 cubic blend exists for these ramp parameters: "
                f"need g_slope*g_delta <= 3*(g_hi-1-g_slope) = {up:.3g} and "
                f"<= 3*(1-g_slope-g_lo) = {dn:.3g}"
            )

    def apply_viscous(self, C, psi, Cdot):
        """D(C, psi) applied to Cdot; defaults to the constant isotropic tensor."""
        if self.viscous_tensor is not None:
            return self.viscous_tensor(C, psi, Cdot)
        return self.eta_visc * Cdot


def _hermite(z, z0, dz, v0, m0, v1, m1):
    """Cubic Hermite value and z-derivative on the band [z0, z0+dz]."""
    t = (z - z0) / dz
    t2 = t * t
    t3 = t2 * t
    val = (
        (2 * t3 - 3 * t2 + 1) * v0
        + (t3 - 2 * t2 + t) * dz * m0
        + (-2 * t3 + 3 * t2) * v1
        + (t3 - t2) * dz * m1
    )
    der = (
        (6 * t2 - 6 * t) * v0 / dz
        + (3 * t2 - 4 * t + 1) * m0
        + (-6 * t2 + 6 * t) * v1 / dz
        + (3 * t2 - 2 * t) * m1
    )
    return val, der


def g_eval(z, params: PotentialParams):
    """Swelling ramp g and g', elementwise.

    Linear 1 + g_slope*z on [-1, 1], plateaus g_hi above 1+g_delta and g_lo
    below -1-g_delta, monotone C^1 cubic Hermite blends on the bands.
    """
    z = np.asarray(z, dtype=float)
    a, dlt = params.g_slope, params.g_delta
    val = np.empty_like(z)
    der = np.empty_like(z)

    lin = np.abs(z) <= 1.0
    val[lin] = 1.0 + a * z[lin]
    der[lin] = a

    hi = z >= 1.0 + dlt
    val[hi] = params.g_hi
    der[hi] = 0.0
    lo = z <= -1.0 - dlt
    val[lo] = params.g_lo
    der[lo] = 0.0

    band_up = (z > 1.0) & (z < 1.0 + dlt)
    if np.any(band_up):
        v, m = _hermite(z[band_up], 1.0, dlt, 1.0 + a, a, params.g_hi, 0.0)
        val[band_up] = v
        der[band_up] = m
    band_dn = (z > -1.0 - dlt) & (z < -1.0)
    if np.any(band_dn):
        v, m = _hermite(z[band_dn], -1.0 - dlt, dlt, params.g_lo, 0.0, 1.0 - a, a)
        val[band_dn] = v
        der[band_dn] = m
    if z.ndim == 0:
        return float(val), float(der)
    return val, der


def _require_positive_det(det, what: str):
    if np.any(det <= 0.0):
        raise NonpositiveDeterminant(
            f"{what} evaluated at det = {float(np.min(det)):.3e} <= 0"
        )


def wel_eval(A: np.ndarray, params: PotentialParams):
    """Ogden-type elastic density and its stress dA_wel.

    value  = (alpha/p)|A|^p + (c_det/q) det(A)^(-q)
    stress = alpha |A|^(p-2) A - c_det det(A)^(-q) A^(-T)
    """
    det = mat_det(A)
    _require_positive_det(det, "elastic density")
    inv, _ = mat_inv_det(A)
    nrm = frob(A, 2)
    det_q = det ** (-params.q)
    value = (params.alpha / params.p) * nrm**params.p + (params.c_det / params.q) * det_q
    stress = params.alpha * nrm ** (params.p - 2) * A - params.c_det * det_q * transpose(inv)
    return value, stress


def why_eval(G: np.ndarray, params: PotentialParams):
    """Second-gradient density (gamma/beta)|G|^beta and stress gamma|G|^(beta-2)G.

    beta > d >= 2 makes the stress continuous through G = 0 with value 0.
    """
    nrm = frob(G, 3)
    value = (params.gamma / params.beta) * nrm**params.beta
    stress = params.gamma * nrm ** (params.beta - 2.0) * G
    return value, stress


def wpf_eval(psi, grad_psi: np.ndarray, F: np.ndarray, params: PotentialParams):
    """Phase-field density with pulled-back Korteweg term, plus all derivatives.

    Returns (value, d_psi, d_gradpsi, d_F) where, writing m = F^-T grad_psi:
      value     = (a_dw/4)(psi^2-1)^2 + (b_kw/2)|m|^2
      d_psi     = a_dw (psi^3 - psi)
      d_gradpsi = b_kw F^-1 m
      d_F       = -b_kw m (x) (F^-1 m)    so that d_F : G = -b (F^-1 m):(G^T m)
    """
    det = mat_det(F)
    _require_positive_det(det, "phase-field density")
    Finv, _ = mat_inv_det(F)
    m = matvec(transpose(Finv), grad_psi)
    value = 0.25 * params.a_dw * (psi**2 - 1.0) ** 2 + 0.5 * params.b_kw * np.sum(m * m, axis=0)
    d_psi = params.a_dw * (psi**3 - psi)
    Finv_m = matvec(Finv, m)
    d_gradpsi = params.b_kw * Finv_m
    d_F = -params.b_kw * np.einsum("i...,j...->ij...", m, Finv_m)
    return value, d_psi, d_gradpsi, d_F


def dpsi_total(F: np.ndarray, psi, params: PotentialParams):
    """psi-derivative of the full local density wel(F/g(psi)) + double well.

    The Korteweg term carries no explicit psi-dependence (only grad_psi), so
    this is the integrand of the mass-constraint multiplier.
    """
    g, gp = g_eval(psi, params)
    _, stress = wel_eval(F / g, params)
    return -ddot(stress, F) * gp / g**2 + params.a_dw * (np.asarray(psi) ** 3 - psi)


def viscous_eval(F: np.ndarray, Fdot: np.ndarray, psi, params: PotentialParams):
    """Viscous dissipation density 1/2 Cdot : D Cdot and its Fdot-stress.

    Cdot = Fdot^T F + F^T Fdot. For the default constant isotropic D the value
    is (eta_visc/2)|Cdot|^2 and the stress is 2 eta_visc F Cdot; with a user
    tensor the chain rule dV/dFdot : H = D Cdot : (H^T F + F^T H) = 2 F (D Cdot) : H
    still holds because D is symmetric in its action.
    """
    Cdot = matmul(transpose(Fdot), F) + matmul(transpose(F), Fdot)
    C = matmul(transpose(F), F)
    DCdot = params.apply_viscous(C, psi, Cdot)
    value = 0.5 * ddot(Cdot, DCdot)
    stress = 2.0 * matmul(F, DCdot)
    return value, stress


@dataclass
class DiagnosticReport:
    """Sampled frame-indifference and growth diagnostics for the potentials."""

    samples: int
    seed: int
    max_rel_residual_wel: float
    max_rel_residual_why: float
    max_rel_residual_viscous: float
    empirical_stress_control: float
    korn_lower: float
    korn_upper: float
    threshold: float = 1e-10

    @property
    def passed(self) -> bool:
        worst = max(
            self.max_rel_residual_wel,
            self.max_rel_residual_why,
            self.max_rel_residual_viscous,
        )
        return worst < self.threshold

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"frame_indifference {flag} "
            f"(wel {self.max_rel_residual_wel:.3e}, why {self.max_rel_residual_why:.3e}, "
            f"viscous {self.max_rel_residual_viscous:.3e}; threshold {self.threshold:.1e}); "
            f"stress_control_C {self.empirical_stress_control:.6g}; "
            f"viscous bounds [{self.korn_lower:.6g}, {self.korn_upper:.6g}]*|Cdot|^2"
        )


def random_rotations(d: int, count: int, rng) -> np.ndarray:
    """Uniform-ish SO(d) samples, shape (d, d, count)."""
    if d == 2:
        th = rng.uniform(0.0, 2 * np.pi, size=count)
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        return R
    R = np.empty((3, 3, count))
    for k in range(count):
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        if np.linalg.det(Q) < 0:
            Q[:, 0] = -Q[:, 0]
        R[:, :, k] = Q
    return R


def sample_gl_plus(d: int, count: int, rng, spread: float = 0.4) -> np.ndarray:
    """Random well-conditioned matrices with det bounded away from 0."""
    A = np.zeros((d, d, count))
    eye = np.eye(d)[:, :, None]
    need = np.ones(count, dtype=bool)
    while np.any(need):
        k = int(np.sum(need))
        cand = eye + spread * rng.standard_normal((d, d, k))
        A[:, :, need] = cand
        need = mat_det(A) < 0.2
    return A


def check_assumptions(params: PotentialParams, samples: int = 1000, seed: int = 0) -> DiagnosticReport:
    """Sample the structural assumptions the analysis rests on.

    Static frame indifference of wel and why, dynamic frame indifference of
    the viscous potential (rotate F and the rate consistently, value must not
    move), the quadratic bounds on the viscous potential, and the empirical
    constant in |dA_wel(A) A^T| <= C (1 + wel(A)). The constant has no
    reference value anywhere; we report the sampled maximum.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    d = params.d

    A = sample_gl_plus(d, samples, rng)
    R = random_rotations(d, samples, rng)
    val, stress = wel_eval(A, params)
    val_rot, _ = wel_eval(matmul(R, A), params)
    res_wel = float(np.max(np.abs(val_rot - val) / (1.0 + np.abs(val))))

    G = rng.standard_normal((d, d, d, samples))
    gval, _ = why_eval(G, params)
    RG = np.einsum("jm...,mkl...->jkl...", R, G)
    gval_rot, _ = why_eval(RG, params)
    res_why = float(np.max(np.abs(gval_rot - gval) / (1.0 + np.abs(gval))))

    F = sample_gl_plus(d, samples, rng)
    Fdot = rng.standard_normal((d, d, samples))
    B = rng.standard_normal((d, d, samples))
    S = 0.5 * (B - np.swapaxes(B, 0, 1))
    psi = rng.uniform(-1.5, 1.5, size=samples)
    v0, _ = viscous_eval(F, Fdot, psi, params)
    v1, _ = viscous_eval(matmul(R, F), matmul(S, matmul(R, F)) + matmul(R, Fdot), psi, params)
    res_visc = float(np.max(np.abs(v1 - v0) / (1.0 + np.abs(v0))))

    K = matmul(stress, transpose(A))
    c_emp = float(np.max(frob(K, 2) / (1.0 + val)))

    # Quadratic bounds on the default viscous tensor: V = (eta/2)|Cdot|^2, so
    # lower = upper = eta/2. With a user hook we report the sampled ratios.
    Cdot = matmul(transpose(Fdot), F) + matmul(transpose(F), Fdot)
    nrm2 = np.maximum(ddot(Cdot, Cdot), 1e-300)
    ratio = v0 / nrm2
    korn_lower = float(np.min(ratio))
    korn_upper = float(np.max(ratio))

    return DiagnosticReport(
        samples=samples,
        seed=seed,
        max_rel_residual_wel=res_wel,
        max_rel_residual_why=res_why,
        max_rel_residual_viscous=res_visc,
        empirical_stress_control=c_emp,
        korn_lower=korn_lower,
        korn_upper=korn_upper,
    )
