"""Borel Resummation Module

Borel transform of an energy series, exact-rational Pade approximants in the
Borel plane, location of the nearest Borel singularity, Laplace resummation
for g > 0 and fitting of the large-order growth of the coefficients.

Pade systems are solved in exact rational arithmetic; evaluation of the
approximant and the Laplace integral are done in floating point.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import roots_laguerre, rgamma
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from src.config_manager import ConfigManager
from src.series_engine import EnergySeries, sign_pattern_holds


logger = logging.getLogger(__name__)

MIN_SINGULARITY_COEFFS = 12
MIN_FIT_WINDOW = 8
PADE_POLE = "pade-pole"
RATIO_TEST = "ratio-test"


class BorelError(Exception):
    """Base class for Borel-plane errors"""
    pass


class InsufficientOrder(BorelError):
    """Raised when a series is too short for the requested analysis"""
    pass


class SingularPadeSystem(BorelError):
    """Raised when the Pade linear system is rank-deficient"""

    def __init__(self, L: int, M: int, rank: int):
        super().__init__(f"[{L}/{M}] Pade system has rank {rank} < {M}")
        self.L = L
        self.M = M
        self.rank = rank


class PoleOnContour(BorelError):
    """Raised when the approximant has a pole on the Laplace contour"""

    def __init__(self, pole: complex):
        super().__init__(f"Pade pole {pole} lies on the positive real axis")
        self.pole = pole


@dataclass
class BorelSettings:
    """Numerical knobs shared by the Borel-plane operations"""

    pade_order: int = 15
    companion_steps: int = 3
    start_nodes: int = 16
    max_nodes: int = 16384
    rel_tol: float = 1e-10
    pole_tolerance: float = 1e-8
    froissart_residue: float = 1e-12
    froissart_distance: float = 1e-6
    fit_k_min: int = 20
    window_step: int = 10

    @classmethod
    def from_config(cls, config: ConfigManager) -> "BorelSettings":
        return cls(
            pade_order=int(config.get("borel.pade.order", cls.pade_order)),
            companion_steps=int(config.get("borel.pade.companion_steps", cls.companion_steps)),
            start_nodes=int(config.get("borel.quadrature.start_nodes", cls.start_nodes)),
            max_nodes=int(config.get("borel.quadrature.max_nodes", cls.max_nodes)),
            rel_tol=float(config.get("borel.quadrature.rel_tol", cls.rel_tol)),
            pole_tolerance=float(config.get("borel.pole_tolerance", cls.pole_tolerance)),
            froissart_residue=float(config.get("borel.froissart_residue", cls.froissart_residue)),
            froissart_distance=float(config.get("borel.froissart_distance",
                                                cls.froissart_distance)),
            fit_k_min=int(config.get("borel.fit.k_min", cls.fit_k_min)),
            window_step=int(config.get("borel.ratio.window_step", cls.window_step)),
        )


@dataclass(frozen=True)
class BorelSeries:
    """Coefficients b_k = E^(k) / k! of the Borel transform"""

    level: int
    coeffs: Tuple[Fraction, ...]

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def truncated(self, order: int) -> "BorelSeries":
        return BorelSeries(self.level, self.coeffs[:order + 1])


@dataclass(frozen=True)
class PadeApproximant:
    """N(x)/D(x) with exact coefficients, lowest degree first, D(0) = 1"""

    numerator: Tuple[Fraction, ...]
    denominator: Tuple[Fraction, ...]
    L: int
    M: int
    level: int = 0

    def taylor_coefficients(self, count: int) -> List[Fraction]:
        """Exact Taylor expansion of N/D through x^(count-1)"""
        out: List[Fraction] = []
        for i in range(count):
            value = self.numerator[i] if i < len(self.numerator) else Fraction(0)
            for j in range(1, min(i, self.M) + 1):
                value -= self.denominator[j] * out[i - j]
            out.append(value)
        return out

    def __call__(self, x):
        """Evaluate in floating point at a scalar or numpy array"""
        num = npoly.polyval(x, [float(c) for c in self.numerator])
        den = npoly.polyval(x, [float(c) for c in self.denominator])
        return num / den

    def poles(self) -> List[complex]:
        return _polynomial_roots(self.denominator)

    def zeros(self) -> List[complex]:
        return _polynomial_roots(self.numerator)

    def residue(self, pole: complex) -> complex:
        """Residue at a simple pole, N(p)/D'(p)"""
        num = npoly.polyval(pole, [complex(c) for c in self.numerator])
        derivative = npoly.polyder([complex(c) for c in self.denominator])
        return num / npoly.polyval(pole, derivative)


@dataclass
class SingularityEstimate:
    level: int
    location: complex
    method: str
    order_used: int
    stability: Optional[float] = None

    def to_record(self) -> Dict[str, Any]:
        return {
            "level": self.level,
            "method": self.method,
            "order_used": self.order_used,
            "value": float(self.location.real),
            "error_estimate": float(abs(self.location.imag)),
            "stability": self.stability,
        }


@dataclass
class ResummationResult:
    """Borel-Laplace sum at one coupling

    value is the Borel sum E(g); raw_integral is the unnormalized integral
    of exp(-x/g) times the approximant, equal to g * value.
    """

    level: int
    g: float
    value: float
    error_estimate: float
    raw_integral: float
    order_used: int
    nodes: int
    stability: Optional[float] = None
    refinement: List[float] = field(default_factory=list)

    def to_record(self) -> Dict[str, Any]:
        return {
            "level": self.level,
            "method": "borel-laplace",
            "order_used": self.order_used,
            "value": self.value,
            "error_estimate": self.error_estimate,
            "stability": self.stability,
        }


@dataclass
class LargeOrderFit:
    """|E^(k)| ~ K A^k k^b k! over the fitted window"""

    level: int
    A: float
    b: float
    K_amp: float
    residuals: List[float]
    std_errors: Tuple[float, float, float]
    k_min: int
    k_max: int
    sign_alternates: bool
    degenerate: bool
    stability: Optional[float] = None

    @property
    def stokes_constant(self) -> float:
        """(-1)^n A^b K / Gamma(-b)"""
        return (-1) ** self.level * self.A ** self.b * self.K_amp * float(rgamma(-self.b))

    def to_records(self) -> List[Dict[str, Any]]:
        order_used = self.k_max
        se_log_a, se_b, se_log_k = self.std_errors
        rows = [
            ("large-order:A", self.A, self.A * se_log_a),
            ("large-order:b", self.b, se_b),
            ("large-order:K", self.K_amp, self.K_amp * se_log_k),
            ("large-order:stokes", self.stokes_constant, None),
        ]
        return [
            {"level": self.level, "method": method, "order_used": order_used,
             "value": value, "error_estimate": error, "stability": self.stability}
            for method, value, error in rows
        ]


def borel_transform(s: EnergySeries) -> BorelSeries:
    """b_k = E^(k) / k!, exact"""
    return BorelSeries(s.level, tuple(c / math.factorial(k) for k, c in enumerate(s.coeffs)))


def _to_fraction(value) -> Fraction:
    # sympy Rational or Integer
    return Fraction(int(value.p), int(value.q))


def pade(b: BorelSeries, L: int, M: int) -> PadeApproximant:
    """Exact [L/M] Pade approximant of a Borel series

    Solves sum_{j=0..M} q_j b_{L+i-j} = 0 for i = 1..M with q_0 = 1, then
    p_i = sum_j q_j b_{i-j} for i <= L.

    Args:
        b: Borel series with at least L + M + 1 coefficients
        L: Numerator degree
        M: Denominator degree

    Returns:
        PadeApproximant whose expansion matches b through order L + M
    """
    if L < 0 or M < 0:
        raise ValueError(f"Pade orders must be non-negative, got [{L}/{M}]")
    if len(b.coeffs) < L + M + 1:
        raise InsufficientOrder(
            f"[{L}/{M}] needs {L + M + 1} coefficients, series has {len(b.coeffs)}"
        )

    def coeff(i: int) -> Fraction:
        return b.coeffs[i] if i >= 0 else Fraction(0)

    q: List[Fraction] = [Fraction(1)]
    if M > 0:
        rows = [[QQ(coeff(L + i - j).numerator, coeff(L + i - j).denominator)
                 for j in range(1, M + 1)] for i in range(1, M + 1)]
        rhs = [[QQ(-coeff(L + i).numerator, coeff(L + i).denominator)] for i in range(1, M + 1)]
        system = DomainMatrix(rows, (M, M), QQ)
        rank = system.rank()
        if rank < M:
            raise SingularPadeSystem(L, M, rank)
        solution = system.lu_solve(DomainMatrix(rhs, (M, 1), QQ)).to_Matrix()
        q.extend(_to_fraction(solution[j, 0]) for j in range(M))

    p = [sum((q[j] * coeff(i - j) for j in range(min(i, M) + 1)), Fraction(0))
         for i in range(L + 1)]
    approximant = PadeApproximant(tuple(p), tuple(q), L, M, b.level)

    expansion = approximant.taylor_coefficients(L + M + 1)
    if expansion != list(b.coeffs[:L + M + 1]):
        raise BorelError(f"[{L}/{M}] re-expansion does not reproduce the input series")
    logger.debug(f"level {b.level}: [{L}/{M}] Pade approximant solved exactly")
    return approximant


def pade_with_fallback(b: BorelSeries, L: int, M: int) -> PadeApproximant:
    """[L/M] Pade, decrementing L on a singular system down to L = 0"""
    while True:
        try:
            return pade(b, L, M)
        except SingularPadeSystem as e:
            if L == 0:
                raise
            logger.warning(f"{e}; retrying with [{L - 1}/{M}]")
            L -= 1


def _polynomial_roots(coeffs: Sequence[Fraction]) -> List[complex]:
    """Roots of sum c_i x^i at raised working precision"""
    trimmed = list(coeffs)
    while trimmed and trimmed[-1] == 0:
        trimmed.pop()
    if len(trimmed) <= 1:
        return []
    with mpmath.workdps(60):
        highest_first = [mpmath.mpf(c.numerator) / c.denominator for c in reversed(trimmed)]
        roots = mpmath.polyroots(highest_first, maxsteps=400, extraprec=400)
        return [complex(r) for r in roots]


def filtered_poles(p: PadeApproximant, settings: Optional[BorelSettings] = None) -> List[complex]:
    """Poles of the approximant with Froissart doublets removed

    A pole is a doublet when its residue is negligible against the series
    scale and a numerator zero sits next to it.
    """
    settings = settings or BorelSettings()
    scale = max(abs(float(p.numerator[0])) if p.numerator else 0.0, 1.0)
    zeros = p.zeros()
    kept = []
    for pole in p.poles():
        small = abs(p.residue(pole)) < settings.froissart_residue * scale
        paired = any(abs(pole - z) < settings.froissart_distance * max(1.0, abs(pole))
                     for z in zeros)
        if small and paired:
            logger.warning(f"Discarding Froissart doublet near {pole}")
            continue
        kept.append(pole)
    return kept


def _nearest_pole(b: BorelSeries, settings: BorelSettings) -> Tuple[complex, int]:
    M = b.order // 2
    approximant = pade_with_fallback(b, M, M)
    poles = filtered_poles(approximant, settings)
    if not poles:
        raise BorelError(f"[{approximant.L}/{approximant.M}] approximant has no poles")
    return min(poles, key=abs), approximant.L + approximant.M


def _ratio_limit(b: BorelSeries) -> complex:
    """Three-level Richardson extrapolation of b_k / b_{k+1} in 1/k"""
    if any(c == 0 for c in b.coeffs[-4:]):
        raise BorelError("ratio test needs non-zero trailing coefficients")
    k = b.order - 3
    total = 0.0
    for j in range(3):
        ratio = float(b.coeffs[k + j] / b.coeffs[k + j + 1])
        total += ratio * (k + j) ** 2 * (-1) ** j / (math.factorial(j) * math.factorial(2 - j))
    return complex(total, 0.0)


def singularity_estimate(b: BorelSeries, method: str = PADE_POLE,
                         settings: Optional[BorelSettings] = None) -> SingularityEstimate:
    """Nearest Borel-plane singularity

    Args:
        b: Borel series with at least 12 coefficients
        method: 'pade-pole' (nearest filtered pole of the diagonal approximant)
            or 'ratio-test' (Richardson limit of b_k / b_{k+1})
        settings: Numerical settings; window_step sets the stability window

    Returns:
        SingularityEstimate with the relative change against the estimate
        from window_step fewer coefficients, when that many are available
    """
    settings = settings or BorelSettings()
    if len(b.coeffs) < MIN_SINGULARITY_COEFFS:
        raise InsufficientOrder(
            f"singularity estimate needs {MIN_SINGULARITY_COEFFS} coefficients, "
            f"got {len(b.coeffs)}"
        )

    def estimate(series: BorelSeries) -> Tuple[complex, int]:
        if method == PADE_POLE:
            return _nearest_pole(series, settings)
        if method == RATIO_TEST:
            return _ratio_limit(series), series.order
        raise ValueError(f"unknown singularity method: {method}")

    location, used = estimate(b)

    stability = None
    shorter = b.order - settings.window_step
    if shorter + 1 >= MIN_SINGULARITY_COEFFS:
        previous, _ = estimate(b.truncated(shorter))
        stability = abs(location - previous) / abs(location) if location else None

    logger.debug(f"level {b.level}: {method} singularity at {location} (K={used})")
    return SingularityEstimate(b.level, location, method, used, stability)


@lru_cache(maxsize=16)
def _laguerre_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_laguerre(nodes)
    return x, w


def _contour_pole(p: PadeApproximant, tolerance: float) -> Optional[complex]:
    """First pole within tolerance of the integration path [0, inf), if any"""
    for pole in p.poles():
        distance = abs(pole.imag) if pole.real >= 0 else abs(pole)
        if distance <= tolerance:
            return pole
    return None


def _check_contour(p: PadeApproximant, tolerance: float) -> None:
    pole = _contour_pole(p, tolerance)
    if pole is not None:
        raise PoleOnContour(pole)


def _gauss_laguerre(p: PadeApproximant, g: float, settings: BorelSettings
                    ) -> Tuple[float, float, int, List[float]]:
    nodes = settings.start_nodes
    x, w = _laguerre_rule(nodes)
    value = float(np.sum(w * p(g * x)))
    changes: List[float] = []
    while nodes * 2 <= settings.max_nodes:
        nodes *= 2
        x, w = _laguerre_rule(nodes)
        refined = float(np.sum(w * p(g * x)))
        change = abs(refined - value)
        changes.append(change)
        value = refined
        if change <= settings.rel_tol * abs(value):
            break
    logger.debug(f"Laplace quadrature at g={g}: {nodes} nodes, last change "
                 f"{changes[-1] if changes else float('nan'):.3e}")
    return value, (changes[-1] if changes else 0.0), nodes, changes


def laplace_sum(p: PadeApproximant, g: float,
                companion: Optional[PadeApproximant] = None,
                settings: Optional[BorelSettings] = None) -> ResummationResult:
    """Borel sum E(g) = integral_0^inf exp(-t) B(g t) dt of a Pade approximant

    Args:
        p: Approximant of the Borel transform
        g: Coupling, strictly positive
        companion: Lower-order approximant for the Pade-order error estimate.
            A companion with a pole on the contour is ignored with a warning.
        settings: Quadrature settings

    Returns:
        ResummationResult; error_estimate is the larger of the last quadrature
        change and the distance to the companion sum
    """
    settings = settings or BorelSettings()
    if not g > 0:
        raise ValueError(f"coupling must be positive, got g={g}")
    _check_contour(p, settings.pole_tolerance)

    value, quadrature_error, nodes, changes = _gauss_laguerre(p, g, settings)

    error = quadrature_error
    stability = None
    if companion is not None:
        pole = _contour_pole(companion, settings.pole_tolerance)
        if pole is not None:
            logger.warning(f"[{companion.L}/{companion.M}] companion has a pole at {pole} "
                           f"on the contour; Pade-order error estimate dropped")
        else:
            other, _, _, _ = _gauss_laguerre(companion, g, settings)
            error = max(error, abs(value - other))
            stability = abs(value - other) / abs(value) if value else None

    return ResummationResult(
        level=p.level, g=g, value=value, error_estimate=error, raw_integral=g * value,
        order_used=p.L + p.M, nodes=nodes, stability=stability, refinement=changes,
    )


class BorelLaplaceResummer:
    """Callable g -> ResummationResult for one energy series

    The error companion is the highest of [L-j/M-j], j = 1..companion_steps,
    that solves and keeps the positive axis free of poles. Only the main
    approximant may raise PoleOnContour.
    """

    def __init__(self, series: EnergySeries, L: Optional[int] = None, M: Optional[int] = None,
                 settings: Optional[BorelSettings] = None):
        self.settings = settings or BorelSettings()
        L = self.settings.pade_order if L is None else L
        M = self.settings.pade_order if M is None else M
        self.borel = borel_transform(series)
        self.approximant = pade_with_fallback(self.borel, L, M)
        self.companion = self._select_companion(self.approximant.L, self.approximant.M)

    def _select_companion(self, L: int, M: int) -> Optional[PadeApproximant]:
        if L < 1 or M < 1:
            return None
        for step in range(1, self.settings.companion_steps + 1):
            if L - step < 0 or M - step < 0:
                break
            try:
                candidate = pade_with_fallback(self.borel, L - step, M - step)
            except BorelError as e:
                logger.warning(f"companion [{L - step}/{M - step}] unavailable: {e}")
                continue
            pole = _contour_pole(candidate, self.settings.pole_tolerance)
            if pole is None:
                return candidate
            logger.warning(f"companion [{candidate.L}/{candidate.M}] has a pole at {pole} "
                           f"on the contour; stepping down")
        logger.warning(f"level {self.borel.level}: no usable companion below [{L}/{M}]; "
                       f"Pade-order error estimate dropped")
        return None

    def __call__(self, g: float) -> ResummationResult:
        return laplace_sum(self.approximant, g, self.companion, self.settings)


def _log_abs(value: Fraction) -> float:
    return math.log(abs(value.numerator)) - math.log(value.denominator)


def _fit_window(s: EnergySeries, k_min: int, k_max: int
                ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ks = [k for k in range(k_min, k_max + 1) if s[k] != 0]
    if len(ks) < MIN_FIT_WINDOW + 1:
        raise InsufficientOrder(f"only {len(ks)} non-zero coefficients in [{k_min}, {k_max}]")
    k_arr = np.array(ks, dtype=float)
    y = np.array([_log_abs(s[k]) - math.lgamma(k + 1) for k in ks])
    design = np.column_stack([k_arr, np.log(k_arr), np.ones_like(k_arr)])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    return coef, residuals, design, k_arr


def fit_large_order(s: EnergySeries, k_min: Optional[int] = None, k_max: Optional[int] = None,
                    settings: Optional[BorelSettings] = None,
                    rms_threshold: float = 0.05) -> LargeOrderFit:
    """Least-squares fit of log|E^(k)| - log k! = k log A + b log k + log K

    Args:
        s: Energy series
        k_min: First order in the window (default from settings, 20)
        k_max: Last order in the window (default: highest available)
        settings: Window and step settings
        rms_threshold: Residual rms above which the fit is flagged degenerate

    Returns:
        LargeOrderFit; degenerate is set when signs do not alternate or the
        model does not describe the data
    """
    settings = settings or BorelSettings()
    k_min = settings.fit_k_min if k_min is None else k_min
    k_max = s.order if k_max is None else k_max
    if k_min < 1:
        raise ValueError(f"k_min must be at least 1, got {k_min}")
    if k_max > s.order:
        raise InsufficientOrder(f"k_max={k_max} exceeds available order {s.order}")
    if k_max - k_min < MIN_FIT_WINDOW:
        raise InsufficientOrder(f"fit window [{k_min}, {k_max}] narrower than {MIN_FIT_WINDOW}")

    coef, residuals, design, _ = _fit_window(s, k_min, k_max)
    log_a, b, log_k = (float(c) for c in coef)

    dof = max(len(residuals) - 3, 1)
    sigma2 = float(residuals @ residuals) / dof
    covariance = sigma2 * np.linalg.pinv(design.T @ design)
    std_errors = tuple(float(math.sqrt(max(v, 0.0))) for v in np.diag(covariance))

    alternates = sign_pattern_holds(s, start=k_min, stop=k_max)
    rms = float(np.sqrt(np.mean(residuals ** 2)))
    degenerate = not alternates or rms > rms_threshold

    stability = None
    shifted_min, shifted_max = k_min - settings.window_step, k_max - settings.window_step
    if shifted_min >= 1 and shifted_max - shifted_min >= MIN_FIT_WINDOW:
        try:
            shifted, _, _, _ = _fit_window(s, shifted_min, shifted_max)
            previous_a = math.exp(float(shifted[0]))
            stability = abs(math.exp(log_a) - previous_a) / math.exp(log_a)
        except InsufficientOrder:
            stability = None

    fit = LargeOrderFit(
        level=s.level, A=math.exp(log_a), b=b, K_amp=math.exp(log_k),
        residuals=[float(r) for r in residuals], std_errors=std_errors,
        k_min=k_min, k_max=k_max, sign_alternates=alternates, degenerate=degenerate,
        stability=stability,
    )
    if degenerate:
        logger.warning(f"level {s.level}: large-order fit is degenerate "
                       f"(alternating={alternates}, rms={rms:.3e})")
    logger.debug(f"level {s.level}: fit A={fit.A:.6g} b={fit.b:.6g} K={fit.K_amp:.6g} "
                 f"on [{k_min}, {k_max}]")
    return fit
