"""Coefficient m, nonlinearity f and their truncations.

``m`` vanishes at the prescribed zeros ``t_1 < ... < t_K`` and is positive on
each bump ``(t_{k-1}, t_k)`` with ``t_0 = 0``.  ``f`` is positive on
``(0, s_star)`` and vanishes at ``s_star``.  Nothing is asserted about ``m``
above ``t_K`` or at 0, nor about ``f`` outside ``[0, s_star]``.

All evaluators accept scalars or arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad

TOL_ZERO_ANALYTIC = 1e-10
TOL_ZERO_TABULATED = 1e-6


def _check_zeros(zeros) -> np.ndarray:
    z = np.asarray(zeros, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("at least one zero of m is required")
    if not np.all(np.isfinite(z)):
        raise ValueError("zeros must be finite")
    if z[0] <= 0.0:
        raise ValueError("zeros must be positive")
    if np.any(np.diff(z) <= 0.0):
        raise ValueError("zeros must be strictly increasing")
    return z


class PiecewiseLinear:
    """Interpolant of ``[(t, value), ...]``, constant beyond the table ends."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("tabulated points must be a list of at least two [t, value] pairs")
        if np.any(np.diff(pts[:, 0]) <= 0.0):
            raise ValueError("tabulated abscissae must be strictly increasing")
        self.x = pts[:, 0]
        self.y = pts[:, 1]
        self._cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(self.x) * (self.y[1:] + self.y[:-1]))])
        self._origin = float(self._primitive(0.0))

    def __call__(self, t):
        return np.interp(t, self.x, self.y)

    def _primitive(self, t):
        t = np.asarray(t, dtype=float)
        x, y = self.x, self.y
        j = np.clip(np.searchsorted(x, t, side="right") - 1, 0, x.size - 2)
        tc = np.clip(t, x[0], x[-1])
        slope = (y[j + 1] - y[j]) / (x[j + 1] - x[j])
        dt = tc - x[j]
        inside = self._cum[j] + y[j] * dt + 0.5 * slope * dt * dt
        below = np.minimum(t - x[0], 0.0) * y[0]
        above = np.maximum(t - x[-1], 0.0) * y[-1]
        return inside + below + above

    def integral_from_zero(self, t):
        return self._primitive(t) - self._origin


# ----------------------------------------------------------------------------
# coefficient m
# ----------------------------------------------------------------------------


class CoefficientM:
    """Base for m. Subclasses provide ``__call__`` and ``primitive`` (int_0^t m)."""

    tol_zero = TOL_ZERO_ANALYTIC
    family = "abstract"

    def __init__(self, zeros):
        self.zeros = _check_zeros(zeros)

    @property
    def K(self) -> int:
        return self.zeros.size

    @property
    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[0.0], self.zeros])

    def __call__(self, t):
        raise NotImplementedError

    def primitive(self, t):
        raise NotImplementedError

    def integral(self, a: float, b: float) -> float:
        return float(self.primitive(b) - self.primitive(a))


class SineBumpM(CoefficientM):
    """m(s) = h_k sin(pi (s - t_{k-1}) / (t_k - t_{k-1})) on the k-th bump.

    Below 0 the first bump formula is continued and above ``t_K`` the last one,
    so m changes sign past ``t_K``.
    """

    family = "sine-bump"

    def __init__(self, zeros, heights):
        super().__init__(zeros)
        self.heights = np.asarray(heights, dtype=float).ravel()
        if self.heights.shape != self.zeros.shape:
            raise ValueError("need one height per zero of m")
        left = self.breakpoints[:-1]
        self._left = left
        self._width = self.zeros - left
        self._bump = 2.0 * self.heights * self._width / np.pi
        self._cum = np.concatenate([[0.0], np.cumsum(self._bump)])[:-1]

    def _bump_index(self, t):
        return np.clip(np.searchsorted(self.zeros, t, side="left"), 0, self.K - 1)

    def __call__(self, t):
        j = self._bump_index(t)
        return self.heights[j] * np.sin(np.pi * (np.asarray(t, dtype=float) - self._left[j]) / self._width[j])

    def primitive(self, t):
        j = self._bump_index(t)
        phase = np.pi * (np.asarray(t, dtype=float) - self._left[j]) / self._width[j]
        return self._cum[j] + self.heights[j] * self._width[j] / np.pi * (1.0 - np.cos(phase))

    def bump_integrals(self) -> np.ndarray:
        """Closed form int_{t_{k-1}}^{t_k} m = 2 h_k (t_k - t_{k-1}) / pi."""
        return self._bump.copy()


class TabulatedM(CoefficientM):
    family = "tabulated"
    tol_zero = TOL_ZERO_TABULATED

    def __init__(self, zeros, points):
        super().__init__(zeros)
        self.table = PiecewiseLinear(points)

    def __call__(self, t):
        return self.table(t)

    def primitive(self, t):
        return self.table.integral_from_zero(t)


class CallableM(CoefficientM):
    """User-supplied m; integrals by adaptive Gauss-Kronrod with the zeros as breakpoints."""

    family = "callable"

    def __init__(self, zeros, func: Callable[[float], float]):
        super().__init__(zeros)
        self.func = func

    def __call__(self, t):
        return np.vectorize(self.func, otypes=[float])(t)

    def _primitive_scalar(self, t: float) -> float:
        lo, hi = sorted((0.0, t))
        pts = [b for b in self.breakpoints if lo < b < hi]
        val = quad(self.func, lo, hi, points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        return val if t >= 0 else -val

    def primitive(self, t):
        return np.vectorize(self._primitive_scalar, otypes=[float])(t)


# ----------------------------------------------------------------------------
# nonlinearity f
# ----------------------------------------------------------------------------


class NonlinearityF:
    """Base for f. Subclasses provide ``__call__`` and ``primitive`` (F = int_0^t f)."""

    tol_zero = TOL_ZERO_ANALYTIC
    family = "abstract"

    def __init__(self, s_star: float):
        s_star = float(s_star)
        if not np.isfinite(s_star) or s_star <= 0.0:
            raise ValueError("s_star must be positive")
        self.s_star = s_star

    def __call__(self, t):
        raise NotImplementedError

    def primitive(self, t):
        raise NotImplementedError

    @cached_property
    def F_at_s_star(self) -> float:
        return float(self.primitive(self.s_star))

    def truncated(self, t):
        """f_*: f(0) below 0, f on [0, s_star), 0 from s_star on."""
        t = np.asarray(t, dtype=float)
        inner = self(np.clip(t, 0.0, self.s_star))
        out = np.where(t < 0.0, self(0.0), np.where(t < self.s_star, inner, 0.0))
        return out if out.ndim else float(out)

    def truncated_primitive(self, t):
        """F_* = int_0^t f_*; equals F(s_star) from s_star on."""
        t = np.asarray(t, dtype=float)
        inner = self.primitive(np.clip(t, 0.0, self.s_star))
        out = np.where(t < 0.0, self(0.0) * t, np.where(t < self.s_star, inner, self.F_at_s_star))
        return out if out.ndim else float(out)


class SineF(NonlinearityF):
    """f(t) = a sin(pi t / s_star)."""

    family = "sine"

    def __init__(self, s_star: float = 1.0, amplitude: float = 1.0):
        super().__init__(s_star)
        self.amplitude = float(amplitude)

    def __call__(self, t):
        return self.amplitude * np.sin(np.pi * np.asarray(t, dtype=float) / self.s_star)

    def primitive(self, t):
        w = np.pi / self.s_star
        return self.amplitude / w * (1.0 - np.cos(w * np.asarray(t, dtype=float)))


class PolynomialF(NonlinearityF):
    """f(t) = sum_i c_i t^i (ascending coefficients)."""

    family = "polynomial"

    def __init__(self, s_star: float, coefficients: Sequence[float]):
        super().__init__(s_star)
        self.poly = Polynomial(np.asarray(coefficients, dtype=float))
        self._prim = self.poly.integ(lbnd=0.0)

    def __call__(self, t):
        return self.poly(np.asarray(t, dtype=float))

    def primitive(self, t):
        return self._prim(np.asarray(t, dtype=float))


class TabulatedF(NonlinearityF):
    family = "tabulated"
    tol_zero = TOL_ZERO_TABULATED

    def __init__(self, s_star: float, points):
        super().__init__(s_star)
        self.table = PiecewiseLinear(points)

    def __call__(self, t):
        return self.table(t)

    def primitive(self, t):
        return self.table.integral_from_zero(t)


class CallableF(NonlinearityF):
    family = "callable"

    def __init__(self, s_star: float, func: Callable[[float], float]):
        super().__init__(s_star)
        self.func = func

    def __call__(self, t):
        return np.vectorize(self.func, otypes=[float])(t)

    def _primitive_scalar(self, t: float) -> float:
        lo, hi = sorted((0.0, t))
        pts = [self.s_star] if lo < self.s_star < hi else None
        val = quad(self.func, lo, hi, points=pts, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        return val if t >= 0 else -val

    def primitive(self, t):
        return np.vectorize(self._primitive_scalar, otypes=[float])(t)


def f_star(F: NonlinearityF, t):
    return F.truncated(t)


def F_star(F: NonlinearityF, t):
    return F.truncated_primitive(t)


# ----------------------------------------------------------------------------
# problem and truncated problems
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    m: CoefficientM
    f: NonlinearityF

    @property
    def zeros(self) -> np.ndarray:
        return self.m.zeros

    @property
    def K(self) -> int:
        return self.m.K

    def truncated(self, k: int) -> "TruncatedEnergy":
        return TruncatedEnergy(self.m, self.f, k)


@dataclass(frozen=True)
class TruncatedEnergy:
    """The pair (m_k, f_*) for a fixed bump index k in 1..K."""

    m: CoefficientM
    f: NonlinearityF
    k: int
    bump_integral: float = field(init=False)

    def __post_init__(self):
        if not 1 <= self.k <= self.m.K:
            raise ValueError(f"k must lie in 1..{self.m.K}, got {self.k}")
        a, b = self.interval
        object.__setattr__(self, "bump_integral", self.m.integral(a, b))

    @property
    def interval(self) -> tuple[float, float]:
        bp = self.m.breakpoints
        return float(bp[self.k - 1]), float(bp[self.k])

    @property
    def half_bump(self) -> float:
        return 0.5 * self.bump_integral

    def m_k(self, t: float) -> float:
        a, b = self.interval
        return float(self.m(t)) if a <= t < b else 0.0

    def M_k(self, t: float) -> float:
        a, b = self.interval
        if t <= a:
            return 0.0
        if t >= b:
            return self.bump_integral
        return self.m.integral(a, t)


def m_k(T: TruncatedEnergy, t: float) -> float:
    return T.m_k(t)


def M_k(T: TruncatedEnergy, t: float) -> float:
    return T.M_k(t)


# ----------------------------------------------------------------------------
# hypothesis validation
# ----------------------------------------------------------------------------


@dataclass
class Violation:
    hypothesis: str
    message: str
    locations: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"hypothesis": self.hypothesis, "message": self.message, "locations": self.locations}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"passed": self.passed, "violations": [v.to_dict() for v in self.violations]}


def _interior_samples(a: float, b: float, n: int) -> np.ndarray:
    return a + (b - a) * np.arange(1, n + 1) / (n + 1)


def validate_spec(M: CoefficientM, F: NonlinearityF, samples: int = 200) -> ValidationReport:
    """Check hypotheses (m) and (f) on sample grids; never raises on failure."""
    if samples < 10:
        raise ValueError("samples must be >= 10")
    report = ValidationReport()
    z = M.zeros
    bad = [float(t) for t in z if not abs(float(M(t))) <= M.tol_zero]
    if bad:
        report.violations.append(Violation("m", "m does not vanish at its declared zeros", bad))
    bp = M.breakpoints
    for k in range(1, M.K + 1):
        ts = _interior_samples(bp[k - 1], bp[k], samples)
        vals = np.asarray(M(ts), dtype=float)
        neg = ts[~(vals > 0.0)]
        if neg.size:
            report.violations.append(
                Violation("m", f"m is not positive on bump {k} ({bp[k - 1]:g}, {bp[k]:g})",
                          [float(t) for t in neg[:10]])
            )
    fs = float(F(F.s_star))
    if not abs(fs) <= F.tol_zero:
        report.violations.append(Violation("f", f"f(s_star) = {fs:.6g} is not zero", [F.s_star]))
    ts = _interior_samples(0.0, F.s_star, samples)
    vals = np.asarray(F(ts), dtype=float)
    neg = ts[~(vals > 0.0)]
    if neg.size:
        report.violations.append(
            Violation("f", "f is not positive on (0, s_star)", [float(t) for t in neg[:10]])
        )
    return report
