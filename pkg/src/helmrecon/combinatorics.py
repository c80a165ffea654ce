"""Multi-indices, multinomial weights and inclusion-exclusion sums.

Weights are kept as :class:`fractions.Fraction` and only turned into floats
when a polynomial is evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import factorial, prod
from typing import Sequence

MAX_SUBSET_ELL = 20


class CombinatoricsError(ValueError):
    pass


MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class SignedSubset:
    members: tuple[int, ...]  # 1-based, sorted
    sign: int


@dataclass(frozen=True)
class QPolynomial:
    ell: int
    a: int
    terms: tuple[tuple[MultiIndex, Fraction], ...]

    def evaluate(self, w: Sequence[complex]) -> complex:
        if len(w) != self.ell:
            raise CombinatoricsError(f"Q_{self.ell},{self.a} takes {self.ell} arguments, got {len(w)}")
        total = 0j
        for alpha, coef in self.terms:
            total += float(coef) * prod(wj**aj for wj, aj in zip(w, alpha))
        return total


def _check_ell(ell: int) -> None:
    if ell < 1:
        raise CombinatoricsError(f"ell must be >= 1, got {ell}")


@lru_cache(maxsize=None)
def enumerate_multi_indices(ell: int, a: int) -> tuple[MultiIndex, ...]:
    """All ``alpha`` in N_0^ell with ``|alpha| == a``, lexicographically descending.

    The order puts weight on the first slot first, e.g. ``(1, 0)`` before
    ``(0, 1)``.
    """
    _check_ell(ell)
    if a < 0:
        raise CombinatoricsError(f"degree must be >= 0, got {a}")
    if ell == 1:
        return ((a,),)
    out = []
    for first in range(a, -1, -1):
        for rest in enumerate_multi_indices(ell - 1, a - first):
            out.append((first,) + rest)
    return tuple(out)


def multinomial_weight(ell: int, a: int, alpha: Sequence[int]) -> Fraction:
    """``binom(ell + a; 1 + alpha) / ell!`` as an exact rational."""
    _check_ell(ell)
    alpha = tuple(alpha)
    if len(alpha) != ell or any(x < 0 for x in alpha):
        raise CombinatoricsError(f"alpha {alpha} is not a multi-index of length {ell}")
    if sum(alpha) != a:
        raise CombinatoricsError(f"|alpha| = {sum(alpha)} but degree is {a}")
    denom = prod(factorial(1 + x) for x in alpha)
    return Fraction(factorial(ell + a), denom * factorial(ell))


@lru_cache(maxsize=None)
def q_polynomial(ell: int, a: int) -> QPolynomial:
    terms = tuple((alpha, multinomial_weight(ell, a, alpha)) for alpha in enumerate_multi_indices(ell, a))
    return QPolynomial(ell, a, terms)


@lru_cache(maxsize=None)
def signed_subsets(ell: int) -> tuple[SignedSubset, ...]:
    """Non-empty subsets of {1..ell}, by size then lexicographically.

    Each carries ``(-1)**(ell - |S|)``.
    """
    _check_ell(ell)
    if ell > MAX_SUBSET_ELL:
        raise CombinatoricsError(
            f"refusing to enumerate 2^{ell} - 1 subsets (cap is ell <= {MAX_SUBSET_ELL})"
        )
    out = []
    for size in range(1, ell + 1):
        sign = 1 if (ell - size) % 2 == 0 else -1
        for members in combinations(range(1, ell + 1), size):
            out.append(SignedSubset(members, sign))
    return tuple(out)


def pie_evaluate(ell: int, ell_prime: int, w: Sequence[complex]) -> complex:
    """Left-hand side of the inclusion-exclusion identity.

    ``(1/ell!) * sum_S (-1)^(ell-|S|) (sum_{j in S} w_j)^ell_prime``
    """
    if ell_prime < 1:
        raise CombinatoricsError(f"exponent must be >= 1, got {ell_prime}")
    if len(w) != ell:
        raise CombinatoricsError(f"need {ell} weights, got {len(w)}")
    total = 0j
    for s in signed_subsets(ell):
        total += s.sign * sum(w[j - 1] for j in s.members) ** ell_prime
    return total / factorial(ell)


def pie_closed_form(ell: int, ell_prime: int, w: Sequence[complex]) -> complex:
    """Right-hand side: 0, prod(w), or prod(w) * Q_{ell, ell'-ell}(w)."""
    if ell_prime < ell:
        return 0j
    p = prod(complex(x) for x in w)
    if ell_prime == ell:
        return p
    return p * q_polynomial(ell, ell_prime - ell).evaluate(w)
