"""Stationarity / invertibility regions and root-clipping projection.

A coefficient vector ``alpha`` of length ``d`` is stable when every root of
the reversed characteristic polynomial

    z**d - alpha[0] * z**(d-1) - ... - alpha[d-1]

lies inside the disk of radius ``1 - delta``.  This is equivalent to the
back-shift polynomial ``1 - alpha[0] B - ... - alpha[d-1] B**d`` having all
of its roots outside the unit circle, which is the condition used for both
the AR and the MA part of ``y_t = sum phi y_{t-i} - sum theta e_{t-j} + e_t``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_DELTA = 0.01
ZERO_TOL = 1e-8
IMAG_TOL = 1e-10

__all__ = [
    "DEFAULT_DELTA",
    "StabilityRegion",
    "char_roots",
    "effective_order",
    "is_member",
    "max_root_modulus",
    "project",
    "scale_roots",
]


@dataclass(frozen=True)
class StabilityRegion:
    """Closed inner approximation of the stability region.

    Members are the vectors of length ``dim`` whose characteristic roots all
    have modulus at most ``1 - delta``.
    """

    dim: int
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def radius(self) -> float:
        return 1.0 - self.delta

    def contains(self, alpha) -> bool:
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.dim,):
            raise ValueError(f"expected length {self.dim}, got {alpha.shape}")
        return is_member(alpha, self.delta)

    def project(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.dim,):
            raise ValueError(f"expected length {self.dim}, got {alpha.shape}")
        return project(alpha, self.delta)


def effective_order(alpha, tol: float = 0.0) -> int:
    """Index (1-based) of the last coefficient with ``|alpha_i| > tol``."""
    alpha = np.asarray(alpha, dtype=float)
    nz = np.flatnonzero(np.abs(alpha) > tol)
    return int(nz[-1]) + 1 if nz.size else 0


def _companion(head: np.ndarray) -> np.ndarray:
    d = head.size
    C = np.zeros((d, d))
    C[0, :] = head
    if d > 1:
        C[np.arange(1, d), np.arange(d - 1)] = 1.0
    return C


def char_roots(alpha) -> np.ndarray:
    """Roots of ``z**d' - alpha_1 z**(d'-1) - ... - alpha_d'``.

    ``d'`` is the effective order, so trailing zeros are ignored.  Roots are
    the eigenvalues of the companion matrix (LAPACK balances it first).
    An all-zero input gives an empty array.
    """
    alpha = np.asarray(alpha, dtype=float).ravel()
    if not np.all(np.isfinite(alpha)):
        raise ValueError("coefficients must be finite")
    d = effective_order(alpha)
    if d == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(_companion(alpha[:d])).astype(complex)


def max_root_modulus(alpha) -> float:
    roots = char_roots(alpha)
    return float(np.max(np.abs(roots))) if roots.size else 0.0


def is_member(alpha, delta: float = DEFAULT_DELTA) -> bool:
    """True iff every characteristic root has modulus <= ``1 - delta``.

    ``delta=0`` is the open unit disk (strict inequality), i.e. the exact
    stationarity / invertibility condition.
    """
    m = max_root_modulus(alpha)
    if delta == 0:
        return m < 1.0
    return m <= 1.0 - delta


def _coeffs_from_roots(roots: np.ndarray) -> np.ndarray:
    poly = np.poly(roots)
    if np.iscomplexobj(poly):
        if np.max(np.abs(poly.imag)) > IMAG_TOL * max(1.0, np.max(np.abs(poly.real))):
            raise ArithmeticError("clipped roots are not closed under conjugation")
        poly = poly.real
    return -poly[1:]


def scale_roots(alpha, factor: float) -> np.ndarray:
    """Coefficients whose characteristic roots are ``factor`` times those of ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    return alpha * factor ** np.arange(1, alpha.size + 1)


def project(alpha, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Approximate projection onto the stability region by root clipping.

    Roots of the effective-order head with modulus above ``1 - delta`` are
    pulled radially onto the circle of that radius, and the polynomial is
    rebuilt.  This is not the Euclidean projection (the region is not
    convex); it keeps the effective order and the trailing zeros intact.

    Members are returned unchanged, so the map is idempotent.
    """
    alpha = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(alpha)):
        raise ValueError("coefficients must be finite")
    if delta <= 0 or delta >= 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if is_member(alpha, delta):
        return alpha.copy()

    radius = 1.0 - delta
    d = effective_order(alpha, ZERO_TOL)
    out = np.zeros_like(alpha)
    head = alpha[:d]
    roots = char_roots(head)
    mod = np.abs(roots)
    big = mod > radius
    roots[big] *= radius / mod[big]
    head = _coeffs_from_roots(roots)

    # Clustered roots on the boundary come back from eigvals a hair outside
    # the circle; shrink radially until the membership test agrees.
    for k in range(60):
        m = max_root_modulus(head)
        if m <= radius:
            break
        head = scale_roots(head, radius / m * (1.0 - 1e-15 * 4.0**k))
    else:  # pragma: no cover
        raise ArithmeticError("root clipping failed to reach the region")
    out[:d] = head
    return out
