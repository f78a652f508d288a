"""Weyl Algebra Module

Exact normal-ordered operator polynomials in the Bargmann variables z and
d/dz, acting on polynomials written in the unnormalized monomial basis z^m.
All coefficients are exact rationals.
"""

import logging
from fractions import Fraction
from math import comb, perm
from typing import Dict, Iterable, Iterator, Mapping, Tuple, Union

logger = logging.getLogger(__name__)

BigRational = Fraction
Scalar = Union[int, Fraction]


class WeylAlgebraError(Exception):
    """Raised for malformed operator or vector input"""
    pass


def _as_rational(value: Scalar) -> Fraction:
    if isinstance(value, float):
        raise WeylAlgebraError("floats are not allowed in exact coefficients")
    return Fraction(value)


class WeylPoly:
    """Normal-ordered polynomial sum of c_ij z^i d^j with rational coefficients

    The (zpow, dpow) keys always mean z^zpow placed left of d^dpow, so the
    representation itself is normal ordered. Zero coefficients are never stored.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Tuple[int, int], Scalar] = None):
        cleaned: Dict[Tuple[int, int], Fraction] = {}
        for (zpow, dpow), coeff in (terms or {}).items():
            if zpow < 0 or dpow < 0:
                raise WeylAlgebraError(f"negative power in term z^{zpow} d^{dpow}")
            value = _as_rational(coeff)
            if value:
                cleaned[(zpow, dpow)] = value
        self._terms = cleaned

    @property
    def terms(self) -> Dict[Tuple[int, int], Fraction]:
        return dict(self._terms)

    @classmethod
    def constant(cls, value: Scalar) -> "WeylPoly":
        return cls({(0, 0): value})

    @classmethod
    def z(cls) -> "WeylPoly":
        return cls({(1, 0): 1})

    @classmethod
    def d(cls) -> "WeylPoly":
        return cls({(0, 1): 1})

    def coefficient(self, zpow: int, dpow: int) -> Fraction:
        return self._terms.get((zpow, dpow), Fraction(0))

    def degree(self) -> int:
        return max((i + j for i, j in self._terms), default=0)

    def items(self) -> Iterator[Tuple[Tuple[int, int], Fraction]]:
        return iter(sorted(self._terms.items()))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, WeylPoly):
            return self._terms == other._terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "WeylPoly(0)"
        parts = [f"{c}*z^{i}*d^{j}" for (i, j), c in self.items()]
        return "WeylPoly(" + " + ".join(parts) + ")"

    def __add__(self, other: Union["WeylPoly", Scalar]) -> "WeylPoly":
        if not isinstance(other, WeylPoly):
            other = WeylPoly.constant(other)
        summed = dict(self._terms)
        for key, coeff in other._terms.items():
            summed[key] = summed.get(key, Fraction(0)) + coeff
        return WeylPoly(summed)

    __radd__ = __add__

    def __neg__(self) -> "WeylPoly":
        return WeylPoly({key: -c for key, c in self._terms.items()})

    def __sub__(self, other: Union["WeylPoly", Scalar]) -> "WeylPoly":
        if not isinstance(other, WeylPoly):
            other = WeylPoly.constant(other)
        return self + (-other)

    def __mul__(self, other: Union["WeylPoly", Scalar]) -> "WeylPoly":
        if isinstance(other, WeylPoly):
            return weyl_mul(self, other)
        factor = _as_rational(other)
        return WeylPoly({key: c * factor for key, c in self._terms.items()})

    def __rmul__(self, other: Scalar) -> "WeylPoly":
        return self * other

    def __pow__(self, exponent: int) -> "WeylPoly":
        if exponent < 0:
            raise WeylAlgebraError("operator powers must be non-negative")
        result = WeylPoly.constant(1)
        for _ in range(exponent):
            result = weyl_mul(result, self)
        return result


class MonomialVector:
    """Polynomial sum of c_m z^m in the unnormalized monomial basis"""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Mapping[int, Scalar] = None):
        cleaned: Dict[int, Fraction] = {}
        for degree, coeff in (coeffs or {}).items():
            if degree < 0:
                raise WeylAlgebraError(f"negative degree {degree}")
            value = _as_rational(coeff)
            if value:
                cleaned[degree] = value
        self._coeffs = cleaned

    @classmethod
    def monomial(cls, degree: int, coeff: Scalar = 1) -> "MonomialVector":
        return cls({degree: coeff})

    @property
    def coeffs(self) -> Dict[int, Fraction]:
        return dict(self._coeffs)

    def coefficient(self, degree: int) -> Fraction:
        return self._coeffs.get(degree, Fraction(0))

    def support(self) -> Tuple[int, ...]:
        return tuple(sorted(self._coeffs))

    def is_zero(self) -> bool:
        return not self._coeffs

    def items(self) -> Iterable[Tuple[int, Fraction]]:
        return sorted(self._coeffs.items())

    def __eq__(self, other: object) -> bool:
        if isinstance(other, MonomialVector):
            return self._coeffs == other._coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._coeffs.items()))

    def __repr__(self) -> str:
        return f"MonomialVector({dict(self.items())})"

    def __add__(self, other: "MonomialVector") -> "MonomialVector":
        summed = dict(self._coeffs)
        for degree, coeff in other._coeffs.items():
            summed[degree] = summed.get(degree, Fraction(0)) + coeff
        return MonomialVector(summed)

    def __neg__(self) -> "MonomialVector":
        return MonomialVector({m: -c for m, c in self._coeffs.items()})

    def __sub__(self, other: "MonomialVector") -> "MonomialVector":
        return self + (-other)

    def scale(self, factor: Scalar) -> "MonomialVector":
        factor = _as_rational(factor)
        return MonomialVector({m: c * factor for m, c in self._coeffs.items()})


def weyl_mul(a: WeylPoly, b: WeylPoly) -> WeylPoly:
    """Normal-ordered product a·b

    Uses d^j z^k = sum_r C(j, r) k!/(k-r)! z^(k-r) d^(j-r), so that
    (z^i d^j)(z^k d^l) = sum_r C(j, r) k!/(k-r)! z^(i+k-r) d^(j+l-r).

    Args:
        a: Left factor
        b: Right factor

    Returns:
        The product in normal order
    """
    product: Dict[Tuple[int, int], Fraction] = {}
    for (i, j), ca in a.items():
        for (k, l), cb in b.items():
            base = ca * cb
            for r in range(min(j, k) + 1):
                key = (i + k - r, j + l - r)
                product[key] = product.get(key, Fraction(0)) + base * comb(j, r) * perm(k, r)
    return WeylPoly(product)


def weyl_apply(op: WeylPoly, v: MonomialVector) -> MonomialVector:
    """Apply an operator to a polynomial: z^i d^j z^m = m!/(m-j)! z^(m-j+i)

    Args:
        op: Normal-ordered operator
        v: Polynomial in the unnormalized monomial basis

    Returns:
        The image polynomial, exact
    """
    image: Dict[int, Fraction] = {}
    for (i, j), c in op.items():
        for m, cm in v.items():
            if m < j:
                continue
            degree = m - j + i
            image[degree] = image.get(degree, Fraction(0)) + c * cm * perm(m, j)
    return MonomialVector(image)


def build_hamiltonian() -> Tuple[WeylPoly, WeylPoly]:
    """Harmonic part and quartic perturbation of H(g) = H0 + g V

    H0 = z d + 1/2 has eigenvalues n + 1/2 on z^n. V = (z + d)^4 / 4 is
    expanded symbolically into normal order, keeping all commutator terms.

    Returns:
        Tuple (h0, v)
    """
    z, d = WeylPoly.z(), WeylPoly.d()
    h0 = z * d + Fraction(1, 2)
    v = ((z + d) ** 4) * Fraction(1, 4)
    logger.debug(f"Hamiltonian built: h0={h0!r}, v has {len(v.terms)} normal-ordered terms")
    return h0, v
