"""Dense real/complex linear algebra for the block-structured measurement covariance.

The 2m x 2m symmetric matrices handled here always have the form

    [[ S, -T ],
     [ T,  S ]]

with S symmetric and T antisymmetric.  Such a matrix is the real
representation of the Hermitian m x m complex matrix S + iT, so
inversion and Newton-Schulz refinement are carried out on the complex
half, which costs a factor of two less than working on the assembled
real form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, StructuralError, ValidationError

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class BlockSymmetric:
    """The real block matrix [[s, -t], [t, s]] with s symmetric, t antisymmetric."""

    s: np.ndarray
    t: np.ndarray

    @property
    def m(self) -> int:
        return self.s.shape[0]

    def as_complex(self) -> np.ndarray:
        """The Hermitian m x m matrix s + i t."""
        return self.s + 1j * self.t

    def dense(self) -> np.ndarray:
        """Assemble the full 2m x 2m real matrix."""
        return np.block([[self.s, -self.t], [self.t, self.s]])


@dataclass(frozen=True)
class HermitianInverse:
    """The pair (u, v) representing a block inverse [[u, -v], [v, u]].

    Equivalently the complex matrix u + iv.  ``logdet`` is the log
    determinant of the assembled 2m x 2m matrix that was inverted, kept
    when the inverse came from an exact factorization (None for
    Newton-Schulz refinements).  ``rcond`` is a cheap reciprocal
    condition estimate from the factorization diagonal.
    """

    u: np.ndarray
    v: np.ndarray
    logdet: float | None = None
    rcond: float | None = None

    @property
    def m(self) -> int:
        return self.u.shape[0]

    def as_complex(self) -> np.ndarray:
        return self.u + 1j * self.v

    def dense(self) -> np.ndarray:
        return np.block([[self.u, -self.v], [self.v, self.u]])

    def check_structure(self, tol: float = SYMMETRY_TOL) -> None:
        """Raise if u is not symmetric or v not antisymmetric (relative Frobenius)."""
        scale = max(np.linalg.norm(self.u), 1e-300)
        if np.linalg.norm(self.u - self.u.T) > tol * scale:
            raise StructuralError("u block is not symmetric")
        if np.linalg.norm(self.v + self.v.T) > tol * scale:
            raise StructuralError("v block is not antisymmetric")


def from_complex(c: np.ndarray, **kw) -> HermitianInverse:
    return HermitianInverse(u=np.ascontiguousarray(c.real),
                            v=np.ascontiguousarray(c.imag), **kw)


def assemble_b(x: np.ndarray, a: np.ndarray, sigma_w: float, sigma_z: float) -> BlockSymmetric:
    """Build the block matrix with s = sigma_z^2 I + sigma_w^2 Re(A X^2 A^H),
    t = sigma_w^2 Im(A X^2 A^H), where X = diag(x).

    ``a`` is the m x n complex measurement matrix.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a)
    if a.ndim != 2 or x.ndim != 1 or x.size != a.shape[1]:
        raise StructuralError(
            f"dimension mismatch: x has length {x.size}, A is {a.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("x contains non-finite entries")
    if sigma_w < 0 or sigma_z < 0:
        raise ValidationError("noise levels must be nonnegative")
    m = a.shape[0]
    ax = a * x[np.newaxis, :]
    core = ax @ ax.conj().T  # A X^2 A^H, Hermitian
    s = sigma_z ** 2 * np.eye(m) + sigma_w ** 2 * core.real
    t = sigma_w ** 2 * core.imag
    # enforce exact symmetry lost to rounding
    s = 0.5 * (s + s.T)
    t = 0.5 * (t - t.T)
    return BlockSymmetric(s=s, t=t)


def exact_inverse(b: BlockSymmetric) -> HermitianInverse:
    """Invert the block matrix exactly via the complex Hermitian half.

    Uses Cholesky of s + it (positive definite whenever the assembled
    real matrix is), falling back to pivoted LU.  Raises NumericalError
    with a condition estimate when the matrix is singular or not PD.
    """
    c = b.as_complex()
    m = c.shape[0]
    try:
        cf = scipy.linalg.cho_factor(c, lower=True, check_finite=False)
        inv = scipy.linalg.cho_solve(cf, np.eye(m, dtype=complex), check_finite=False)
        diag = np.abs(np.diag(cf[0]))
        rcond = float((diag.min() / diag.max()) ** 2)
        # det of the 2m x 2m real form is |det(s+it)|^2 = det(s+it)^2 for PD
        logdet = float(2.0 * 2.0 * np.sum(np.log(diag)))
    except scipy.linalg.LinAlgError:
        lu, piv = scipy.linalg.lu_factor(c, check_finite=False)
        diag = np.abs(np.diag(lu))
        rcond = float(diag.min() / max(diag.max(), 1e-300))
        if diag.min() == 0.0 or not np.all(np.isfinite(diag)):
            raise NumericalError("matrix is singular", rcond=rcond) from None
        raise NumericalError(
            "matrix is not positive definite (Cholesky failed)", rcond=rcond) from None
    inv = 0.5 * (inv + inv.conj().T)
    return from_complex(inv, logdet=logdet, rcond=rcond)


def newton_schulz_step(b: BlockSymmetric, m_inv: HermitianInverse) -> HermitianInverse:
    """One Newton-Schulz refinement M' = M + M (I - B M) in the complex form."""
    if b.m != m_inv.m:
        raise StructuralError(
            f"dimension mismatch: B is {b.m}x{b.m}, M is {m_inv.m}x{m_inv.m}")
    bc = b.as_complex()
    mc = m_inv.as_complex()
    r = np.eye(b.m, dtype=complex) - bc @ mc
    mc2 = mc + mc @ r
    mc2 = 0.5 * (mc2 + mc2.conj().T)
    return from_complex(mc2)


def spectral_bounds(mat: np.ndarray) -> tuple[float, float]:
    """Extremal singular values of a real square matrix."""
    mat = np.asarray(mat, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise ValidationError("matrix contains non-finite entries")
    sv = np.linalg.svd(mat, compute_uv=False)
    return float(sv[-1]), float(sv[0])
