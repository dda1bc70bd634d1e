"""Spectral graph wavelet transform: kernel dictionary, exact path, fast path.

The dictionary pairs one low-pass scaling filter with M-1 stretched copies of
a piecewise band-pass kernel, log-spaced so the filters tile the spectrum.
The exact transform diagonalizes the Laplacian (guarded to small graphs); the
fast path expands each filter in shifted Chebyshev polynomials so filtering
costs one sparse matrix-vector product per polynomial order, shared by all
filters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import NumericError, ValidationError
from .graphs import EIGEN_FLOOR, SymmetricLaplacian

DEFAULT_FILTERS = 8
DEFAULT_CHEB_ORDER = 40
DEFAULT_QUAD_POINTS = 2 ** 14
EXACT_DIMENSION_GUARD = 5000

# scale endpoints, in units of 1/lambda_max
SCALE_LO = 1.0
SCALE_HI = 40.0


def wavelet_kernel(lam):
    """Band-pass kernel: lam^2 below 1, a monic cubic on [1, 2], 4/lam^2 above.

    Continuous with matching first derivatives at both knots.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValidationError("wavelet kernel is defined for non-negative arguments")
    low = lam * lam
    mid = -5.0 + lam * (11.0 + lam * (-6.0 + lam))
    high = np.divide(4.0, lam * lam, out=np.zeros_like(lam), where=lam > 2)
    out = np.where(lam < 1, low, np.where(lam <= 2, mid, high))
    return out if out.ndim else float(out)


# argmax of the cubic branch: root of 11 - 12*lam + 3*lam^2 inside [1, 2]
KERNEL_ARGMAX = 2.0 - 1.0 / math.sqrt(3.0)


def kernel_amplitude() -> float:
    """Peak value b = max over lam of the band-pass kernel (on the cubic branch)."""
    return float(wavelet_kernel(KERNEL_ARGMAX))


def scaling_kernel(lam, lambda_max: float, amplitude: float):
    """Low-pass filter b * exp(-(10*lam / (0.3*lambda_max))^4)."""
    if lambda_max <= 0:
        raise ValidationError("scaling kernel needs lambda_max > 0")
    lam = np.asarray(lam, dtype=float)
    out = amplitude * np.exp(-((10.0 * lam / (0.3 * lambda_max)) ** 4))
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class KernelDictionary:
    """Filter bank: index 1 is the scaling function, index M the finest scale.

    `scales` is strictly decreasing; filter m (2-based) uses scales[m-2], so the
    coarsest stretch s_{M-1} = scale_hi/lambda_max comes first and the finest
    s_1 = scale_lo/lambda_max comes last.
    """

    lambda_max: float
    scales: np.ndarray
    amplitude: float

    @property
    def filter_count(self) -> int:
        return len(self.scales) + 1

    def kernel(self, m: int) -> Callable[[np.ndarray], np.ndarray]:
        """Filter m as a callable on the spectral axis (1-based index)."""
        if not 1 <= m <= self.filter_count:
            raise ValidationError(f"filter index {m} outside 1..{self.filter_count}")
        if m == 1:
            return lambda lam: scaling_kernel(lam, self.lambda_max, self.amplitude)
        s = float(self.scales[m - 2])
        return lambda lam: wavelet_kernel(s * np.asarray(lam, dtype=float))

    def evaluate_all(self, lam: np.ndarray) -> np.ndarray:
        """Stack all filters: result column m-1 is filter m evaluated at lam."""
        lam = np.asarray(lam, dtype=float)
        cols = [self.kernel(m)(lam) for m in range(1, self.filter_count + 1)]
        return np.column_stack(cols)


def make_dictionary(lambda_max: float, filters: int = DEFAULT_FILTERS,
                    scale_lo: float = SCALE_LO, scale_hi: float = SCALE_HI) -> KernelDictionary:
    """Log-spaced dictionary of `filters` kernels covering [0, lambda_max]."""
    if lambda_max <= 0:
        raise ValidationError("dictionary needs lambda_max > 0 (degenerate spectrum)")
    if filters < 2:
        raise ValidationError("dictionary needs at least 2 filters")
    if not 0 < scale_lo < scale_hi:
        raise ValidationError("scale endpoints must satisfy 0 < scale_lo < scale_hi")
    if filters == 2:
        warnings.warn("degenerate dictionary: single wavelet scale")
        scales = np.array([scale_lo / lambda_max])
    else:
        scales = np.geomspace(scale_hi / lambda_max, scale_lo / lambda_max, filters - 1)
    return KernelDictionary(
        lambda_max=float(lambda_max),
        scales=scales,
        amplitude=kernel_amplitude(),
    )


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Wavelet coefficients: one row per product-graph vertex, one column per filter."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NumericError("non-finite wavelet coefficients")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def filter_count(self) -> int:
        return self.values.shape[1]


def _laplacian_matrix(L) -> sp.csr_matrix:
    if isinstance(L, SymmetricLaplacian):
        return L.matrix
    return sp.csr_matrix(L)


def exact_sgwt(L, X: np.ndarray, dictionary: KernelDictionary) -> CoefficientTable:
    """Reference transform through a full symmetric eigendecomposition.

    W[tau, m-1] = sum_l g_m(lambda_l) * Xhat(lambda_l) * u_l(tau).  Guarded to
    EXACT_DIMENSION_GUARD vertices; larger graphs must use cheb_apply.
    """
    matrix = _laplacian_matrix(L)
    n = matrix.shape[0]
    if n > EXACT_DIMENSION_GUARD:
        raise ValidationError(
            f"exact transform guarded to {EXACT_DIMENSION_GUARD} vertices "
            f"(got {n}); use the Chebyshev fast path"
        )
    X = np.asarray(X, dtype=float)
    if X.shape != (n,):
        raise ValidationError("signal length does not match Laplacian dimension")

    eigvals, eigvecs = scipy.linalg.eigh(matrix.toarray())
    if eigvals[0] < EIGEN_FLOOR:
        raise NumericError(f"Laplacian eigenvalue {eigvals[0]} below floor {EIGEN_FLOOR}")
    eigvals = np.maximum(eigvals, 0.0)

    xhat = eigvecs.T @ X
    responses = dictionary.evaluate_all(eigvals)  # n x M
    return CoefficientTable(values=eigvecs @ (responses * xhat[:, None]))


def cheb_coeffs(kernel: Callable[[np.ndarray], np.ndarray], lambda_max: float,
                order: int, quad_points: int = DEFAULT_QUAD_POINTS) -> np.ndarray:
    """Chebyshev coefficients c_k of `kernel` on [0, lambda_max], k = 0..order.

    c_k = (2/pi) * int_0^pi cos(k*theta) * kernel((lambda_max/2)(cos theta + 1)) dtheta,
    evaluated by the equal-weight quadrature at `quad_points` Chebyshev nodes.
    """
    if order < 1:
        raise ValidationError("Chebyshev order must be at least 1")
    if lambda_max <= 0:
        raise ValidationError("Chebyshev domain needs lambda_max > 0")
    theta = np.pi * (np.arange(quad_points) + 0.5) / quad_points
    samples = kernel((lambda_max / 2.0) * (np.cos(theta) + 1.0))
    k = np.arange(order + 1)
    return (2.0 / quad_points) * (np.cos(np.outer(k, theta)) @ samples)


@dataclass(frozen=True, eq=False)
class ChebyshevExpansion:
    """Per-filter Chebyshev coefficient lists sharing one spectral domain."""

    lambda_max: float
    coefficients: tuple[np.ndarray, ...]

    @property
    def filter_count(self) -> int:
        return len(self.coefficients)

    @property
    def max_order(self) -> int:
        return max(len(c) - 1 for c in self.coefficients)


def expand_dictionary(dictionary: KernelDictionary, order: int = DEFAULT_CHEB_ORDER,
                      quad_points: int = DEFAULT_QUAD_POINTS,
                      orders: Sequence[int] | None = None) -> ChebyshevExpansion:
    """Expand every dictionary filter; `orders` overrides the shared order per filter."""
    M = dictionary.filter_count
    per_filter = list(orders) if orders is not None else [order] * M
    if len(per_filter) != M:
        raise ValidationError("per-filter order list length must equal the filter count")
    coeffs = tuple(
        cheb_coeffs(dictionary.kernel(m), dictionary.lambda_max, per_filter[m - 1], quad_points)
        for m in range(1, M + 1)
    )
    return ChebyshevExpansion(lambda_max=dictionary.lambda_max, coefficients=coeffs)


class OpCounter:
    """Counts sparse matrix-vector products inside cheb_apply (for cost checks)."""

    def __init__(self):
        self.matvecs = 0


def cheb_apply(L, X: np.ndarray, expansion: ChebyshevExpansion,
               op_counter: OpCounter | None = None) -> CoefficientTable:
    """Fast transform: W[:, m-1] ~= c_{m,0}/2 * X + sum_k c_{m,k} Tbar_k(L) X.

    The shifted polynomials Tbar_k follow the recursion
    Tbar_k = (4/lambda_max * L - 2) Tbar_{k-1} - Tbar_{k-2} with Tbar_0 = X and
    Tbar_1 = (2/lambda_max * L - 1) X; each order costs one matrix-vector
    product shared across all filters.
    """
    matrix = _laplacian_matrix(L)
    X = np.asarray(X, dtype=float)
    if X.shape != (matrix.shape[0],):
        raise ValidationError("signal length does not match Laplacian dimension")
    lam = expansion.lambda_max
    if lam <= 0:
        raise ValidationError("expansion domain must be positive")

    M = expansion.filter_count
    out = np.zeros((matrix.shape[0], M))
    coeffs = expansion.coefficients

    t_prev = X
    for m in range(M):
        out[:, m] = 0.5 * coeffs[m][0] * t_prev

    y = matrix @ X
    if op_counter is not None:
        op_counter.matvecs += 1
    t_cur = (2.0 / lam) * y - X
    for m in range(M):
        if len(coeffs[m]) > 1:
            out[:, m] += coeffs[m][1] * t_cur

    for k in range(2, expansion.max_order + 1):
        y = matrix @ t_cur
        if op_counter is not None:
            op_counter.matvecs += 1
        t_next = (4.0 / lam) * y - 2.0 * t_cur - t_prev
        for m in range(M):
            if len(coeffs[m]) > k:
                out[:, m] += coeffs[m][k] * t_next
        t_prev, t_cur = t_cur, t_next

    return CoefficientTable(values=out)
