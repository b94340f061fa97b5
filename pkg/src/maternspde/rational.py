"""AAA rational approximation of fractional powers and pole-residue conversion.

The sampler needs ``lam**(-alpha) ~ sum_n c_n / (lam + d_n)`` on the
spectral interval of the discretized operator, so that a fractional solve
becomes a weighted sum of shifted integer-order solves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, FitError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_TERMS = 40
DEFAULT_GRID_POINTS = 1000
VALIDATION_POINTS = 10_000


@dataclass(frozen=True)
class Barycentric:
    """``r(x) = sum w_j f_j / (x - z_j) / sum w_j / (x - z_j)``."""

    support: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    error: float
    grid_min: float
    grid_max: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xv = np.atleast_1d(x).ravel()
        D = xv[:, None] - self.support[None, :]
        hit_x, hit_z = np.nonzero(D == 0)
        D[hit_x, hit_z] = 1.0
        C = 1.0 / D
        r = (C @ (self.weights * self.values)) / (C @ self.weights)
        r[hit_x] = self.values[hit_z]
        return r.reshape(x.shape) if x.ndim else float(r[0])

    def poles(self) -> np.ndarray:
        m = len(self.support)
        if m < 2:
            return np.zeros(0, dtype=complex)
        E = np.zeros((m + 1, m + 1), dtype=complex)
        E[0, 1:] = self.weights
        E[1:, 0] = 1.0
        E[1:, 1:] = np.diag(self.support)
        B = np.eye(m + 1, dtype=complex)
        B[0, 0] = 0.0
        p = scipy.linalg.eigvals(E, B)
        p = p[np.isfinite(p)]
        # polish the eigenvalues as roots of the denominator sum w_j / (x - z_j)
        for _ in range(4):
            with np.errstate(divide="ignore", invalid="ignore"):
                C = 1.0 / (p[:, None] - self.support[None, :])
                step = (C @ self.weights) / (-(C ** 2) @ self.weights)
            ok = np.isfinite(step)
            p = np.where(ok, p - np.where(ok, step, 0), p)
        return p

    def residues(self, poles) -> np.ndarray:
        poles = np.asarray(poles, dtype=complex)
        C = 1.0 / (poles[:, None] - self.support[None, :])
        num = C @ (self.weights * self.values)
        dden = -(C ** 2) @ self.weights
        return num / dden

    def value_at_infinity(self) -> float:
        return float(np.sum(self.weights * self.values) / np.sum(self.weights))


def aaa_fit(f, grid, tol: float = DEFAULT_TOL, max_terms: int = DEFAULT_MAX_TERMS,
            relative: bool = True, proper: bool = False) -> Barycentric:
    """Greedy AAA fit of samples ``f`` on ``grid``.

    Each step adds the grid point with the largest (relative) residual as a
    support point and takes the barycentric weights from the smallest right
    singular vector of the row-scaled Loewner matrix. Stops when the max
    relative error on the grid is below ``tol`` or ``max_terms`` support
    points are in use.

    ``proper=True`` constrains ``sum w_j f_j = 0`` so the approximant
    vanishes at infinity (type ``(m-2, m-1)``); its partial-fraction form
    then has no constant term.
    """
    Z = np.asarray(grid, dtype=float).ravel()
    F = np.asarray(f, dtype=float).ravel()
    if Z.shape != F.shape:
        raise ConfigurationError("f and grid must have the same length")
    if not np.all(np.isfinite(F)):
        raise ConfigurationError("f must be finite on the grid")
    if len(np.unique(Z)) < min(max_terms + 1, len(Z)) or len(Z) < 2:
        raise ConfigurationError("grid needs more distinct points than max_terms")
    scale = np.abs(F) if relative else np.full_like(F, np.abs(F).max() or 1.0)
    if np.any(scale == 0):
        raise ConfigurationError("relative AAA requires f != 0 on the grid")

    mask = np.ones(len(Z), dtype=bool)
    support: list[int] = []
    R = np.full_like(F, F.mean())
    w = np.ones(1)
    err = np.inf
    for _ in range(max_terms):
        resid = np.abs(F - R) / scale
        resid[~mask] = -1.0
        j = int(np.argmax(resid))
        support.append(j)
        mask[j] = False
        zs, fs = Z[support], F[support]
        if not mask.any():
            raise FitError("AAA consumed every grid point without reaching the tolerance")
        C = 1.0 / (Z[mask][:, None] - zs[None, :])
        if proper and len(support) == 1:
            w = np.ones(1)
            R = np.full_like(F, fs[0])
            continue
        A = (F[mask][:, None] - fs[None, :]) * C / scale[mask][:, None]
        P = scipy.linalg.null_space(fs[None, :]) if proper else None
        if proper:
            A = A @ P
        try:
            _, _, Vh = np.linalg.svd(A, full_matrices=A.shape[0] < A.shape[1])
        except np.linalg.LinAlgError as exc:
            raise FitError(f"Loewner SVD failed with {len(support)} support points: {exc}")
        w = Vh[-1].conj()
        if proper:
            w = P @ w
        R = F.copy()
        R[mask] = (C @ (w * fs)) / (C @ w)
        err = float(np.max(np.abs(F - R) / scale))
        if err <= tol:
            break
    return Barycentric(Z[support].copy(), F[support].copy(), np.real(w).copy(), err,
                       float(Z.min()), float(Z.max()))


@dataclass(frozen=True)
class RationalApprox:
    """``sum_n weights[n] / (lam + shifts[n]) + constant`` on ``[lam_min, lam_max]``."""

    weights: np.ndarray
    shifts: np.ndarray
    alpha: float | None
    lam_min: float
    lam_max: float
    error: float
    constant: float = 0.0

    @property
    def num_terms(self) -> int:
        return len(self.weights)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.sum(self.weights / (lam[..., None] + self.shifts), axis=-1) + self.constant
        return out if lam.ndim else float(out)


def eval_rational(ra: RationalApprox, lam):
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < ra.lam_min) or np.any(lam_arr > ra.lam_max):
        warnings.warn("evaluating rational approximation outside its fitting interval",
                      RuntimeWarning, stacklevel=2)
    return ra(lam)


def to_pole_residue(bary: Barycentric, alpha: float | None = None,
                    drop_tol: float = 1e-13, imag_tol: float = 1e-8) -> RationalApprox:
    """Partial-fraction form of a barycentric approximant.

    Poles come from the generalized eigenproblem of the barycentric form and
    residues from ``N(p) / D'(p)``. Terms with ``|residue| < drop_tol*||f||``
    are dropped. A pole on ``[grid_min, grid_max]`` or off the real axis
    rejects the fit.
    """
    fnorm = float(np.max(np.abs(bary.values))) or 1.0
    poles = bary.poles()
    res = bary.residues(poles) if len(poles) else np.zeros(0, dtype=complex)
    keep = np.abs(res) >= drop_tol * fnorm
    poles, res = poles[keep], res[keep]
    offaxis = np.abs(poles.imag) > imag_tol * np.maximum(1.0, np.abs(poles))
    if np.any(offaxis):
        raise FitError(f"fit has complex poles {poles[offaxis]}; use a denser grid or "
                       f"a looser tolerance")
    poles, res = poles.real, res.real
    inside = (poles >= bary.grid_min) & (poles <= bary.grid_max)
    if np.any(inside):
        raise FitError(f"pole {poles[inside][0]:.6g} lies inside the fitting interval "
                       f"[{bary.grid_min:g}, {bary.grid_max:g}]; use a denser grid or a "
                       f"lower tolerance")
    constant = bary.value_at_infinity() if len(bary.support) else 0.0
    if abs(constant) < drop_tol * fnorm:
        constant = 0.0
    order = np.argsort(-poles)
    ra = RationalApprox(res[order], -poles[order], alpha, bary.grid_min, bary.grid_max,
                        bary.error, constant)
    check = np.geomspace(bary.grid_min, bary.grid_max, 2000) if bary.grid_min > 0 else \
        np.linspace(bary.grid_min, bary.grid_max, 2000)
    ref = bary(check)
    dev = float(np.max(np.abs(ra(check) - ref) / np.maximum(np.abs(ref), 1e-300)))
    if dev > 10 * max(bary.error, 1e-13):
        raise FitError(f"pole-residue form deviates from the barycentric form by {dev:.2e}")
    return ra


def split_exponent(k: float, eps: float = 1e-12) -> tuple[int, float]:
    """``k = integer + fraction`` with the fraction in ``[0, 1)``; near-integers snap."""
    n = math.floor(k)
    frac = k - n
    if frac < eps:
        return n, 0.0
    if frac > 1 - eps:
        return n + 1, 0.0
    return n, frac


def fit_fractional_power(alpha: float, lam_min: float, lam_max: float,
                         tol: float = DEFAULT_TOL, max_terms: int = DEFAULT_MAX_TERMS,
                         n_grid: int = DEFAULT_GRID_POINTS) -> RationalApprox:
    """Rational approximation of ``lam**(-alpha)`` as a sum of shifted inverses.

    Uses the strictly proper AAA variant so that no constant term remains
    and every term maps to one shifted solve. Shifts must come out
    nonnegative (poles on the negative real axis); anything else is a hard
    error, as is a validated relative error above ``10 * tol``.
    """
    if not 0 < alpha <= 1:
        raise ConfigurationError("alpha must lie in (0, 1]")
    if not 0 < lam_min < lam_max:
        raise ConfigurationError("need 0 < lam_min < lam_max")
    grid = np.geomspace(lam_min, lam_max, n_grid)
    bary = aaa_fit(grid ** (-alpha), grid, tol, max_terms, proper=True)
    ra = to_pole_residue(bary, alpha)
    if abs(ra.constant) > 1e-10:
        raise FitError(f"strictly proper fit left a constant term {ra.constant:.3e}")
    ra = replace(ra, constant=0.0)
    if np.any(ra.shifts < -1e-10):
        raise FitError(f"negative shift {ra.shifts.min():.3e}: shifted operators would not "
                       f"stay positive definite")
    val = np.geomspace(lam_min, lam_max, VALIDATION_POINTS)
    verr = float(np.max(np.abs(ra(val) * val ** alpha - 1.0)))
    if verr > 10 * max(tol, bary.error):
        raise FitError(f"validated relative error {verr:.2e} exceeds 10x tolerance {tol:.1e}")
    return ra


def validation_error(ra: RationalApprox, n: int = VALIDATION_POINTS) -> float:
    lam = np.geomspace(ra.lam_min, ra.lam_max, n)
    return float(np.max(np.abs(ra(lam) * lam ** ra.alpha - 1.0)))
