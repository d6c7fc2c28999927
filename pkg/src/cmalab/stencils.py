"""Centered-difference stencils for complex Hessians on lattice arrays.

All routines act on the full bounding-box array of node values and return
full arrays; callers mask to the region they trust.  The complex Hessian at
a node reads at most one lattice step in each direction, so one collar ring
of valid data around the region of interest is enough.

Real axes are ordered (x_1, y_1, ..., x_n, y_n): array axis 2j carries the
real part of z_{j+1}, axis 2j+1 the imaginary part.
"""

from __future__ import annotations

import math

import numpy as np


def convention_factor(n: int) -> float:
    """Density of (dd^c |z|^2)^n per unit 2n-volume: 4^n * n!.

    Fixed convention d^c = i(dbar - d), dd^c = 2i d dbar.  Every closed-form
    constant in the test suite (capacities, radial masses) assumes it.
    """
    return float(4 ** n * math.factorial(n))


def axial_second(V: np.ndarray, axis: int, h: float) -> np.ndarray:
    """(V(x + h e) - 2 V(x) + V(x - h e)) / h^2 along one real axis."""
    return (np.roll(V, -1, axis=axis) + np.roll(V, 1, axis=axis) - 2.0 * V) / (h * h)


def cross_second(V: np.ndarray, ax_a: int, ax_b: int, h: float) -> np.ndarray:
    """Mixed second derivative via the 4-point cross stencil."""
    Vp = np.roll(V, -1, axis=ax_a)
    Vm = np.roll(V, 1, axis=ax_a)
    out = np.roll(Vp, -1, axis=ax_b)
    out -= np.roll(Vp, 1, axis=ax_b)
    out -= np.roll(Vm, -1, axis=ax_b)
    out += np.roll(Vm, 1, axis=ax_b)
    out /= 4.0 * h * h
    return out


class Hessian:
    """Components of the n x n Hermitian matrix d^2 u / dz_j dz_k-bar.

    For n = 1 the matrix is the scalar (u_xx + u_yy) / 4.  For n = 2 it is
    [[h11, h12], [conj(h12), h22]] with h11, h22 real and h12 = h12r + i h12i.
    """

    __slots__ = ("n", "h11", "h22", "h12r", "h12i")

    def __init__(self, n, h11, h22=None, h12r=None, h12i=None):
        self.n = n
        self.h11 = h11
        self.h22 = h22
        self.h12r = h12r
        self.h12i = h12i

    @classmethod
    def identity_like(cls, other: "Hessian") -> "Hessian":
        one = np.ones_like(other.h11)
        if other.n == 1:
            return cls(1, one)
        zero = np.zeros_like(other.h11)
        return cls(2, one, one.copy(), zero, zero.copy())

    def eigenvalues(self):
        """(lambda_min, lambda_max) arrays; equal for n = 1."""
        if self.n == 1:
            return self.h11, self.h11
        m = 0.5 * (self.h11 + self.h22)
        r = np.sqrt(0.25 * (self.h11 - self.h22) ** 2 + self.h12r ** 2 + self.h12i ** 2)
        return m - r, m + r

    def det_psd(self) -> np.ndarray:
        """Determinant after projecting onto the PSD cone (eigenvalue clipping)."""
        lo, hi = self.eigenvalues()
        return np.maximum(lo, 0.0) * np.maximum(hi, 0.0) if self.n == 2 else np.maximum(lo, 0.0)

    def psd_projected(self) -> "Hessian":
        """Nearest PSD matrix in the Frobenius sense, per node."""
        if self.n == 1:
            return Hessian(1, np.maximum(self.h11, 0.0))
        lo, hi = self.eigenvalues()
        spread = hi - lo
        safe = np.where(spread > 0, spread, 1.0)
        # lam2/(lam2-lam1) * (H - lam1 I) has eigenvalues {0, lam2}
        fac = np.clip(hi, 0.0, None) / safe
        a = np.where(lo >= 0, self.h11, np.where(hi <= 0, 0.0, fac * (self.h11 - lo)))
        b = np.where(lo >= 0, self.h22, np.where(hi <= 0, 0.0, fac * (self.h22 - lo)))
        cr = np.where(lo >= 0, self.h12r, np.where(hi <= 0, 0.0, fac * self.h12r))
        ci = np.where(lo >= 0, self.h12i, np.where(hi <= 0, 0.0, fac * self.h12i))
        return Hessian(2, a, b, cr, ci)


def complex_hessian(V: np.ndarray, n: int, h: float) -> Hessian:
    if n == 1:
        return Hessian(1, 0.25 * (axial_second(V, 0, h) + axial_second(V, 1, h)))
    if n != 2:
        raise ValueError("only complex dimensions 1 and 2 are supported")
    h11 = 0.25 * (axial_second(V, 0, h) + axial_second(V, 1, h))
    h22 = 0.25 * (axial_second(V, 2, h) + axial_second(V, 3, h))
    h12r = 0.25 * (cross_second(V, 0, 2, h) + cross_second(V, 1, 3, h))
    h12i = 0.25 * (cross_second(V, 0, 3, h) - cross_second(V, 1, 2, h))
    return Hessian(2, h11, h22, h12r, h12i)


def mixed_det(hessians: list, n: int) -> np.ndarray:
    """Polarized mixed determinant D(A_1, ..., A_n), identity-padded.

    Normalized so D(A, ..., A) = det(A).  Callers pass k <= n projected
    Hessians; the remaining n - k slots are the identity (one beta factor
    each under the fixed convention).
    """
    k = len(hessians)
    if k > n:
        raise ValueError("more Hessian factors than the complex dimension")
    if n == 1:
        return hessians[0].h11 if k == 1 else np.array(1.0)
    if k == 0:
        return np.array(1.0)
    if k == 1:
        A = hessians[0]
        return 0.5 * (A.h11 + A.h22)
    A, B = hessians
    return (0.5 * (A.h11 * B.h22 + A.h22 * B.h11)
            - (A.h12r * B.h12r + A.h12i * B.h12i))


def gradient_magnitude(V: np.ndarray, h: float) -> np.ndarray:
    """Centered-difference gradient magnitude over all 2n real axes."""
    acc = None
    for ax in range(V.ndim):
        g = (np.roll(V, -1, axis=ax) - np.roll(V, 1, axis=ax)) / (2.0 * h)
        acc = g * g if acc is None else acc + g * g
    return np.sqrt(acc)
