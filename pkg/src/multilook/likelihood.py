"""Negative log-likelihood of multilook speckled measurements and its gradient.

For a look y = A X w + z with w ~ CN(0, sigma_w^2 I) and
z ~ CN(0, sigma_z^2 I), the stacked real vector y~ = [Re y; Im y] is
zero-mean Gaussian with covariance

    C(x) = [[ S, -T ], [ T, S ]],
    S = s_z I + s_w Re(A X^2 A^H),  T = s_w Im(A X^2 A^H),

where s_w = sigma_w^2 / 2 and s_z = sigma_z^2 / 2 are the per-component
variances of the circular complex noises.  Dropping constants, the
negative log-likelihood averaged over looks is

    f(x) = log det C(x) + (1/L) sum_l y~_l^T C(x)^-1 y~_l,

and its gradient, using C^-1 = [[U, -V], [V, U]] and the complex matrix
U + iV, is

    df/dx_j = 4 x_j s_w Re(conj(a_j)^T (U+iV) a_j)
              - (2 x_j s_w / L) sum_l | conj(a_j)^T (U+iV) y_l |^2.

The functions taking per-component variances directly (`eval_fl`,
`grad_fl`) are the primitives; `*_ensemble` wrappers apply the
sigma^2 -> sigma^2/2 conversion from a MeasurementEnsemble.
"""

from __future__ import annotations

import numpy as np

from . import cxla
from .errors import NumericalError, StructuralError
from .sensing import MeasurementEnsemble


def component_sigmas(ens: MeasurementEnsemble) -> tuple[float, float]:
    """Per-real-component standard deviations of the ensemble's complex noises."""
    return ens.sigma_w / np.sqrt(2.0), ens.sigma_z / np.sqrt(2.0)


def cov_blocks(x: np.ndarray, a: np.ndarray, sigma_wc: float,
               sigma_zc: float) -> cxla.BlockSymmetric:
    """Covariance of the stacked real measurement vector (per-component sigmas)."""
    return cxla.assemble_b(x, a, sigma_wc, sigma_zc)


def cov_blocks_ensemble(x: np.ndarray, ens: MeasurementEnsemble) -> cxla.BlockSymmetric:
    swc, szc = component_sigmas(ens)
    return cov_blocks(x, ens.a, swc, szc)


def _stacked(y: np.ndarray) -> np.ndarray:
    return np.concatenate([y.real, y.imag])


def eval_fl(x: np.ndarray, inv: cxla.HermitianInverse, a: np.ndarray,
            looks, sigma_wc: float, sigma_zc: float) -> float:
    """log det C(x) + (1/L) sum_l y~^T C^-1 y~ with C^-1 supplied by the caller.

    The log determinant is taken from the inverse's factorization when
    available and recomputed from a fresh factorization otherwise
    (Newton-Schulz-tracked inverses carry no logdet).
    """
    if inv.logdet is not None:
        logdet = inv.logdet
    else:
        fresh = cxla.exact_inverse(cov_blocks(x, a, sigma_wc, sigma_zc))
        logdet = fresh.logdet
    c = inv.as_complex()
    quad = 0.0
    for y in looks:
        # y~^T Cinv_block y~ for the block form equals Re(y^H (U+iV) y)
        quad += float(np.real(np.vdot(y, c @ y)))
    quad /= max(len(looks), 1)
    return float(logdet + quad)


def grad_fl(x: np.ndarray, inv: cxla.HermitianInverse, a: np.ndarray,
            looks, sigma_wc: float) -> np.ndarray:
    """Gradient of eval_fl in the complex (U+iV) form.

    Cost O(m^2 n + L m n): one m x n product C A, one m x L product
    against the stacked looks, then columnwise inner products.
    """
    x = np.asarray(x, dtype=float)
    if x.size != a.shape[1]:
        raise StructuralError("x length does not match sensing matrix columns")
    c = inv.as_complex()
    p = c @ a                                   # (m, n)
    diag = np.einsum("ij,ij->j", a.conj(), p).real     # conj(a_j)^T C a_j
    sw = sigma_wc ** 2
    grad = 4.0 * x * sw * diag
    if looks:
        ymat = np.stack(looks, axis=1)          # (m, L)
        d = a.conj().T @ (c @ ymat)             # (n, L)
        grad -= (2.0 * x * sw / ymat.shape[1]) * np.sum(np.abs(d) ** 2, axis=1)
    return grad


def eval_fl_ensemble(x: np.ndarray, inv: cxla.HermitianInverse,
                     ens: MeasurementEnsemble) -> float:
    swc, szc = component_sigmas(ens)
    return eval_fl(x, inv, ens.a, ens.looks, swc, szc)


def grad_fl_ensemble(x: np.ndarray, inv: cxla.HermitianInverse,
                     ens: MeasurementEnsemble) -> np.ndarray:
    swc, _ = component_sigmas(ens)
    return grad_fl(x, inv, ens.a, ens.looks, swc)


def _real_cov(x, a, sigma_w, sigma_z):
    ax = a * np.asarray(x, dtype=float)[np.newaxis, :]
    m = a.shape[0]
    return sigma_z ** 2 * np.eye(m) + sigma_w ** 2 * (ax @ ax.T)


def eval_f_real(x: np.ndarray, a: np.ndarray, looks, sigma_w: float,
                sigma_z: float) -> float:
    """Real-measurement variant: log det(S) + (1/L) sum_l y^T S^-1 y with
    S = sigma_z^2 I + sigma_w^2 A X^2 A^T."""
    cov = _real_cov(x, a, sigma_w, sigma_z)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise NumericalError("real covariance is not positive definite")
    try:
        sol = np.linalg.solve(cov, np.stack(looks, axis=1))
    except np.linalg.LinAlgError as e:
        raise NumericalError(str(e)) from None
    quad = float(np.mean(np.einsum("il,il->l", np.stack(looks, axis=1), sol)))
    return float(logdet + quad)


def grad_f_real(x: np.ndarray, a: np.ndarray, looks, sigma_w: float,
                sigma_z: float) -> np.ndarray:
    """Gradient of eval_f_real:
    df/dx_j = 2 x_j sigma_w^2 (a_j^T S^-1 a_j) - (2 x_j sigma_w^2 / L) sum_l (a_j^T S^-1 y_l)^2.
    """
    x = np.asarray(x, dtype=float)
    cov = _real_cov(x, a, sigma_w, sigma_z)
    try:
        inv = np.linalg.inv(cov)
    except np.linalg.LinAlgError as e:
        raise NumericalError(str(e)) from None
    p = inv @ a
    diag = np.einsum("ij,ij->j", a, p)
    ymat = np.stack(looks, axis=1)
    d = a.T @ (inv @ ymat)
    sw = sigma_w ** 2
    return 2.0 * x * sw * diag - (2.0 * x * sw / ymat.shape[1]) * np.sum(d ** 2, axis=1)
