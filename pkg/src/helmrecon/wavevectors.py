"""Auxiliary complex wave vectors for the complex-exponential solutions.

For a frequency ``xi != 0`` and level ``ell`` we need ``zeta_0`` and
``zeta_1..zeta_ell`` with ``zeta . zeta = k^2`` (bilinear, no conjugation) and
``zeta_0 + sum zeta_j = xi``.  The pair ``zeta^+`` / ``zeta^-`` is built in the
orthonormal frame ``e1 = xi/|xi|``, ``e2 = rot90(e1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class WaveVectorError(ValueError):
    pass


def bilinear_dot(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(a[0] * b[0] + a[1] * b[1])


def frame(xi) -> tuple[np.ndarray, np.ndarray, float]:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (2,):
        raise WaveVectorError(f"frequency must be a real 2-vector, got shape {xi.shape}")
    norm = float(np.hypot(xi[0], xi[1]))
    if norm == 0.0:
        raise WaveVectorError("frequency xi = 0 has no wave-vector construction")
    e1 = xi / norm
    e2 = np.array([-e1[1], e1[0]])
    return e1, e2, norm


def _branch_sqrt(r: float) -> complex:
    # principal branch: negative radicand -> +i*sqrt(|r|)
    return complex(np.sqrt(r)) if r >= 0 else 1j * np.sqrt(-r)


def build_zeta_pm(ell: int, xi, k: float) -> tuple[np.ndarray, np.ndarray]:
    if ell < 1:
        raise WaveVectorError(f"ell must be >= 1, got {ell}")
    if k <= 0:
        raise WaveVectorError(f"wavenumber must be positive, got {k}")
    e1, e2, norm = frame(xi)
    if ell % 2:
        t = norm / (ell + 1)
    else:
        t = (norm - k) / ell
    s = _branch_sqrt(k * k - t * t)
    plus = t * e1 + s * e2
    minus = t * e1 - s * e2
    return plus.astype(complex), minus.astype(complex)


@dataclass(frozen=True, eq=False)
class WaveVectorSet:
    ell: int
    xi: np.ndarray
    k: float
    zeta0: np.ndarray
    zetas: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def is_real(self) -> bool:
        return all(np.all(z.imag == 0) for z in (self.zeta0,) + self.zetas)

    @property
    def max_imag(self) -> float:
        return max(float(np.max(np.abs(z.imag))) for z in (self.zeta0,) + self.zetas)

    def constraint_residuals(self) -> tuple[float, float]:
        """``(max |zeta.zeta - k^2|, |zeta_0 + sum zeta_j - xi|)``."""
        k2 = self.k * self.k
        dots = max(abs(bilinear_dot(z, z) - k2) for z in (self.zeta0,) + self.zetas)
        total = self.zeta0 + sum(self.zetas)
        return dots, float(np.linalg.norm(total - self.xi))

    def shift(self, alpha: Sequence[int]) -> np.ndarray:
        """``xi + sum_j alpha_j zeta_j``."""
        if len(alpha) != self.ell:
            raise WaveVectorError(f"multi-index length {len(alpha)} != ell {self.ell}")
        out = self.xi.astype(complex)
        for a, z in zip(alpha, self.zetas):
            out = out + a * z
        return out


def build_wavevector_set(ell: int, xi, k: float) -> WaveVectorSet:
    """Odd ``ell``: ``zeta_0 = zeta^-`` and entries ``+, -, ..., +``.
    Even ``ell``: ``zeta_0 = k e1`` and entries ``+, -, ..., +, -``.
    """
    plus, minus = build_zeta_pm(ell, xi, k)
    e1, _, _ = frame(xi)
    zetas = tuple(plus if j % 2 == 0 else minus for j in range(ell))
    zeta0 = minus if ell % 2 else (k * e1).astype(complex)
    return WaveVectorSet(ell, np.asarray(xi, dtype=float).copy(), float(k), zeta0, zetas)


def real_band_radius(ell: int, k: float) -> float:
    return (ell + 1) * k
