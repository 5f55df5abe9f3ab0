"""Shared numerical kernels.

Levenberg-Marquardt least squares, closed-form intersection of two
axis-aligned conics with a common quadratic part, and seeded samplers
for the noise models.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DegenerateGeometryError, ParameterError

ResidualFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LMProblem:
    residual: ResidualFn
    x0: np.ndarray
    max_iterations: int = 200
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ParameterError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")


@dataclass(frozen=True)
class LMResult:
    params: np.ndarray
    rmse: float
    cost: float
    iterations: int


def _jacobian(fun: ResidualFn, p: np.ndarray, m: int) -> np.ndarray:
    # central differences, step 1e-6 * max(1, |p_k|)
    jac = np.empty((m, p.size))
    for k in range(p.size):
        h = 1e-6 * max(1.0, abs(p[k]))
        hi = p.copy()
        lo = p.copy()
        hi[k] += h
        lo[k] -= h
        jac[:, k] = (np.asarray(fun(hi), float) - np.asarray(fun(lo), float)) / (2 * h)
    return jac


def lm_fit(problem: LMProblem) -> LMResult:
    """Minimize ``sum(residual(p)**2)`` with Levenberg-Marquardt.

    Damping is scaled by ``diag(J^T J)`` and multiplied (divided) by 10
    on a rejected (accepted) step.  Iteration stops when the step norm
    falls below ``tolerance * (|p| + tolerance)``, when the residual is
    exactly zero, or when no damping level reduces the cost any further.

    Raises ConvergenceError when the iteration budget is exhausted or
    the residual is not finite at the starting point; the exception
    carries the last iterate.
    """
    p = np.array(problem.x0, dtype=float)
    r = np.asarray(problem.residual(p), dtype=float)
    m = r.size
    if m < p.size:
        raise ParameterError(f"{m} residuals cannot determine {p.size} parameters")
    if not np.all(np.isfinite(r)):
        raise ConvergenceError("residual is not finite at the initial parameters", p, 0)
    cost = float(r @ r)
    lam = 1e-3

    for it in range(1, problem.max_iterations + 1):
        if cost == 0.0:
            return LMResult(p, 0.0, 0.0, it - 1)
        jac = _jacobian(problem.residual, p, m)
        if not np.all(np.isfinite(jac)):
            raise ConvergenceError("non-finite Jacobian", p, it)
        a = jac.T @ jac
        g = jac.T @ r
        diag = np.diag(a).copy()
        floor = 1e-12 * max(diag.max(initial=0.0), 1e-300)
        diag = np.maximum(diag, floor)

        while True:
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                p_new = p + step
                r_new = np.asarray(problem.residual(p_new), dtype=float)
                cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
                if cost_new < cost:
                    break
            lam *= 10.0
            if lam > 1e20:
                # stationary to working precision
                return LMResult(p, float(np.sqrt(cost / m)), cost, it)

        lam = max(lam / 10.0, 1e-15)
        small = np.linalg.norm(step) <= problem.tolerance * (np.linalg.norm(p) + problem.tolerance)
        p, r, cost = p_new, r_new, cost_new
        if small:
            return LMResult(p, float(np.sqrt(cost / m)), cost, it)

    raise ConvergenceError(
        f"Levenberg-Marquardt did not converge in {problem.max_iterations} iterations",
        p,
        problem.max_iterations,
    )


@dataclass(frozen=True)
class Conic:
    """``a*x**2 + b*y**2 + d*x + e*y + f = 0`` (no cross term)."""

    a: float
    b: float
    d: float
    e: float
    f: float

    @classmethod
    def from_center(cls, cx: float, cy: float, a: float, b: float, c: float = 0.0) -> "Conic":
        """``a*(x-cx)**2 + b*(y-cy)**2 + c = 0``."""
        return cls(a, b, -2 * a * cx, -2 * b * cy, a * cx * cx + b * cy * cy + c)

    def __call__(self, x, y):
        return self.a * x * x + self.b * y * y + self.d * x + self.e * y + self.f


@dataclass(frozen=True)
class ComplexRootPair:
    root1: tuple[complex, complex]
    root2: tuple[complex, complex]

    @property
    def is_real(self) -> bool:
        return all(abs(v.imag) == 0.0 for v in (*self.root1, *self.root2))


def _quadratic_roots(qa: float, qb: float, qc: float) -> tuple[complex, complex]:
    sq = cmath.sqrt(qb * qb - 4 * qa * qc)
    # sign choice avoids cancellation between qb and sq
    q = -0.5 * (qb + sq) if qb >= 0 else -0.5 * (qb - sq)
    if q == 0:
        r = -qb / (2 * qa)
        return complex(r), complex(r)
    return complex(q / qa), complex(qc / q)


def solve_ellipse_pair(eq_a: Conic, eq_b: Conic) -> ComplexRootPair:
    """Intersect two conics that share their quadratic coefficients.

    Subtracting the equations leaves a line; substituting the line into
    ``eq_a`` leaves a univariate quadratic solved in closed form.  Both
    roots are returned, complex when the curves do not meet.
    """
    for name in ("a", "b"):
        va, vb = getattr(eq_a, name), getattr(eq_b, name)
        if not np.isclose(va, vb, rtol=1e-12, atol=0.0):
            raise ParameterError(f"quadratic coefficient {name} differs between equations")
    if eq_a.a <= 0 or eq_a.b <= 0:
        raise ParameterError("quadratic coefficients must be positive")

    dd = eq_a.d - eq_b.d
    de = eq_a.e - eq_b.e
    df = eq_a.f - eq_b.f
    scale = max(abs(eq_a.d), abs(eq_b.d), abs(eq_a.e), abs(eq_b.e), 1e-300)
    if max(abs(dd), abs(de)) <= 1e-14 * scale:
        raise DegenerateGeometryError("equations share a center; no linear constraint remains")

    a, b, d, e, f = eq_a.a, eq_a.b, eq_a.d, eq_a.e, eq_a.f
    if abs(de) >= abs(dd):
        # y = m*x + k
        m, k = -dd / de, -df / de
        x1, x2 = _quadratic_roots(a + b * m * m, 2 * b * m * k + d + e * m, b * k * k + e * k + f)
        return ComplexRootPair((x1, m * x1 + k), (x2, m * x2 + k))
    # x = m*y + k
    m, k = -de / dd, -df / dd
    y1, y2 = _quadratic_roots(b + a * m * m, 2 * a * m * k + e + d * m, a * k * k + d * k + f)
    return ComplexRootPair((m * y1 + k, y1), (m * y2 + k, y2))


def sample_student_t(nu: float, scale: float, n: int, seed=None) -> np.ndarray:
    """Scaled Student's t draws built as ``scale * z / sqrt(chi2_nu / nu)``."""
    if not nu > 0:
        raise ParameterError(f"degrees of freedom must be positive, got {nu}")
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    if n < 0:
        raise ParameterError("n must be non-negative")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    chi2 = rng.chisquare(nu, n)
    return scale * z / np.sqrt(chi2 / nu)


def sample_lognormal(mu_ln: float, sigma_ln: float, n: int, seed=None) -> np.ndarray:
    """``exp(mu_ln + sigma_ln * z)`` with standard normal ``z``."""
    if not sigma_ln > 0:
        raise ParameterError(f"sigma_ln must be positive, got {sigma_ln}")
    if n < 0:
        raise ParameterError("n must be non-negative")
    rng = np.random.default_rng(seed)
    return np.exp(mu_ln + sigma_ln * rng.standard_normal(n))
