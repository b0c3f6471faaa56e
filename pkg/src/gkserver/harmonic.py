"""Exact arithmetic layer: the harmonic recursion and its factorial bounds.

Everything in this package computes over Python ints (arbitrary precision)
and fractions.Fraction (always normalized, positive denominator, value
equality), so no result is ever rounded.

The harmonic recursion is

    a(1) = 1,   a(l) = 1 + (l-1) * a(l-1)

with closed form a(l) = (l-1)! * sum_{i=0}^{l-1} 1/i! and the sandwich
(l-1)! <= a(l) <= e*(l-1)!.  a(l) governs the competitive ratio of the
uniform ("harmonic") memoryless policy: k * a(k) for k metric spaces.
"""

from __future__ import annotations

from fractions import Fraction
from math import ceil, factorial

Rational = Fraction

__all__ = [
    "Rational",
    "alpha",
    "alpha_closed_form",
    "alpha_table",
    "alpha_bounds_check",
    "e_over_approximation",
    "rational_to_str",
    "rational_from_str",
]


def alpha(ell: int) -> int:
    """Harmonic recursion a(ell), unrolled iteratively.

    Rejects ell < 1: the recursion has no value at 0.
    """
    if ell < 1:
        raise ValueError(f"alpha is defined for ell >= 1, got {ell}")
    a = 1
    for i in range(2, ell + 1):
        a = 1 + (i - 1) * a
    return a


def alpha_closed_form(ell: int) -> int:
    """a(ell) via the closed form (ell-1)! * sum_{i<ell} 1/i!.

    Each summand (ell-1)!/i! is an exact integer, so the whole sum is
    computed without rationals. Agrees with alpha() for every ell.
    """
    if ell < 1:
        raise ValueError(f"alpha_closed_form is defined for ell >= 1, got {ell}")
    f = factorial(ell - 1)
    return sum(f // factorial(i) for i in range(ell))


def alpha_table(max_ell: int) -> list[int]:
    """[a(1), a(2), ..., a(max_ell)] in one pass."""
    if max_ell < 1:
        raise ValueError(f"alpha_table needs max_ell >= 1, got {max_ell}")
    out = [1]
    for i in range(2, max_ell + 1):
        out.append(1 + (i - 1) * out[-1])
    return out


def e_over_approximation(terms: int = 50) -> Fraction:
    """A certified rational upper bound on e.

    Truncated series sum_{i=0}^{terms-1} 1/i! plus the tail bound
    2/terms!; the true tail sum_{i>=terms} 1/i! is below 2/terms! for
    terms >= 1, so the result always exceeds e.  With the default 50
    terms the overshoot is under 10^-64.
    """
    if terms < 1:
        raise ValueError("need at least one series term")
    partial = sum(Fraction(1, factorial(i)) for i in range(terms))
    return partial + Fraction(2, factorial(terms))


def alpha_bounds_check(ell: int) -> bool:
    """True iff (ell-1)! <= a(ell) and a(ell) is below e*(ell-1)!.

    The upper bound involves the irrational e, so it is checked two ways,
    both exact: the coarse rational bound a(ell)/(ell-1)! <= 3, and the
    tight bound a(ell) <= ceil(E * (ell-1)!) where E is a certified
    rational over-approximation of e (series terms scale with ell so the
    ceiling stays sharp through the CLI's supported range).
    """
    if ell < 1:
        raise ValueError(f"alpha_bounds_check is defined for ell >= 1, got {ell}")
    a = alpha(ell)
    f = factorial(ell - 1)
    if a < f:
        return False
    if a > 3 * f:
        return False
    e_up = e_over_approximation(max(50, ell + 2))
    return a <= ceil(e_up * f)


def rational_to_str(x: Fraction) -> str:
    """Serialize exactly as "num/den" (always with the slash)."""
    return f"{x.numerator}/{x.denominator}"


def rational_from_str(s: str) -> Fraction:
    """Parse "num/den" or a plain integer string into a Fraction."""
    return Fraction(s.strip())
