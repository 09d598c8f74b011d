"""Sampling the characteristic function and its derivatives from homodyne data.

Each estimate is the sample mean of a per-record kernel, so its covariance is
the kernel's sample covariance divided by the record count. Matrix estimates
evaluate every entry on the same records and keep the full cross-covariance.

The derivative kernel is built from the pattern functions ``D_q^r(x, gamma)``.
They carry poles ``(gamma + gamma*)^-k`` that cancel between the two halves of
the kernel: the kernel is the divided difference of the entire function
``g(t) = t exp(x t - t^2/2)`` between ``-gamma*`` and ``gamma``. Records whose
``|gamma + gamma*|`` falls below :func:`confluent_radius` are therefore
evaluated through the integral form of that divided difference, which is
regular there and reduces to the Hermite moment kernel at ``beta = 0``.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from . import gbm
from .errors import (DataQualityError, DomainError, InsufficientDataError,
                     NumericalInconsistencyError, PoleError, RangeError)
from .specfun import compositions3, factorial, hermite_table, multinomial

POLE_EPS = 1e-12
MAX_EXCLUDED_FRACTION = 1e-3
DEFAULT_PHASE_WINDOW = 0.01
CHUNK = 1 << 15
SQRT2 = math.sqrt(2.0)
LOG_FLOAT_MAX = math.log(np.finfo(float).max)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


# ---------------------------------------------------------------------------
# data containers

@dataclass
class PhaseDiagnostic:
    chi2: float
    threshold: float
    bins: int
    passed: bool


class QuadratureDataset:
    """Phase-tagged quadrature records ``(x_j, phi_j)`` with ``phi_j`` in [0, pi)."""

    def __init__(self, x, phi, folded=0):
        x = np.ascontiguousarray(x, dtype=float).ravel()
        phi = np.ascontiguousarray(phi, dtype=float).ravel()
        if x.shape != phi.shape:
            raise DomainError(f"x and phi lengths differ: {x.size} vs {phi.size}")
        if x.size < 1:
            raise InsufficientDataError("a dataset needs at least one record")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(phi))):
            raise DomainError("non-finite quadrature or phase value")
        if np.any(phi < 0) or np.any(phi >= math.pi):
            raise DomainError("phases must lie in [0, pi); use QuadratureDataset.folded()")
        self.x = x
        self.phi = phi
        self.folded_count = folded
        self._uniformity = None

    @classmethod
    def folded(cls, x, phi):
        """Fold arbitrary phases into [0, pi) using x(phi + pi) = -x(phi)."""
        x = np.asarray(x, dtype=float).ravel()
        phi = np.asarray(phi, dtype=float).ravel()
        k = np.floor(phi / math.pi)
        new_phi = phi - k * math.pi
        # rounding can land exactly on pi
        top = new_phi >= math.pi
        new_phi[top] -= math.pi
        k[top] += 1
        sign = np.where(k % 2 == 0, 1.0, -1.0)
        return cls(sign * x, new_phi, folded=int(np.count_nonzero(k)))

    def __len__(self):
        return self.x.size

    @property
    def M(self):
        return self.x.size

    def __eq__(self, other):
        return (isinstance(other, QuadratureDataset) and np.array_equal(self.x, other.x)
                and np.array_equal(self.phi, other.phi))

    def uniformity(self):
        if self._uniformity is None:
            self._uniformity = phase_uniformity(self)
        return self._uniformity

    def require_uniform(self):
        diag = self.uniformity()
        if not diag.passed:
            raise DataQualityError(
                f"phases not uniform on [0, pi): chi2={diag.chi2:.1f} > {diag.threshold:.1f} ({diag.bins} bins)")

    def chunks(self, size=CHUNK):
        for start in range(0, self.M, size):
            yield self.x[start:start + size], self.phi[start:start + size]


@dataclass
class ComplexEstimate:
    value: complex
    cov: np.ndarray
    M: int
    excluded: int = 0

    @property
    def std_error(self):
        """Standard errors of the real and imaginary parts."""
        return np.sqrt(np.diag(self.cov))

    def within(self, target, k=3.0, extra_cov=None):
        """True when real and imaginary deviations are each below k sigma."""
        cov = self.cov if extra_cov is None else self.cov + extra_cov
        d = complex(self.value) - complex(target)
        err = np.sqrt(np.maximum(np.diag(cov), 0.0))
        tiny = 1e-12 * (1.0 + abs(complex(target)))
        return bool(abs(d.real) <= k * err[0] + tiny and abs(d.imag) <= k * err[1] + tiny)


@dataclass
class EstimatedMatrix:
    """Matrix of estimates; ``cov`` orders components (Re e00, Im e00, Re e01, ...)."""

    values: np.ndarray
    cov: np.ndarray
    M: int
    excluded: int = 0
    spec: object = None

    @property
    def size(self):
        return self.values.shape[0]

    def entry(self, i, j):
        k = 2 * (i * self.size + j)
        return ComplexEstimate(complex(self.values[i, j]), self.cov[k:k + 2, k:k + 2].copy(), self.M, self.excluded)


# ---------------------------------------------------------------------------
# running mean / covariance with a fixed merge order

@dataclass
class _Moments:
    dim: int
    count: int = 0
    mean: np.ndarray = None
    m2: np.ndarray = None

    def __post_init__(self):
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros((self.dim, self.dim))

    def add(self, block):
        n_b = block.shape[0]
        if n_b == 0:
            return
        mean_b = block.mean(axis=0)
        centred = block - mean_b
        m2_b = centred.T @ centred
        total = self.count + n_b
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (n_b / total)
        self.m2 = self.m2 + m2_b + np.outer(delta, delta) * (self.count * n_b / total)
        self.count = total

    def covariance_of_mean(self):
        if self.count < 2:
            return np.zeros((self.dim, self.dim))
        return self.m2 / (self.count - 1) / self.count


def _complex_to_real(block):
    """(n, k) complex -> (n, 2k) real with interleaved Re/Im."""
    out = np.empty(block.shape[:-1] + (2 * block.shape[-1],))
    out[..., 0::2] = block.real
    out[..., 1::2] = block.imag
    return out


# ---------------------------------------------------------------------------
# pattern functions

def _pattern_coefficient(q, r, k1, k2, k3):
    return (multinomial(r, k1, k2, k3) * (-1) ** (q + k1 + k3) * factorial(q + k1) * 2.0 ** (-k3 / 2))


def pattern_D(q, r, x, gamma):
    """Pattern function D_q^r(x, gamma); zero for negative orders.

    Raises :class:`PoleError` when Re(gamma) == 0 and :class:`RangeError`
    (carrying ``log_magnitude``) when the result is not representable.
    """
    if q < 0 or r < 0:
        return 0j
    gamma = complex(gamma)
    x = float(x)
    s = 2.0 * gamma.real
    if abs(gamma.real) <= POLE_EPS:
        raise PoleError(f"pattern function pole: Re(gamma) = 0 (gamma={gamma})")
    herm = hermite_table(r, gamma / SQRT2)
    total = 0j
    for k1, k2, k3 in compositions3(r):
        total += _pattern_coefficient(q, r, k1, k2, k3) * x**k2 * herm[k3] / s ** (q + k1 + 1)
    exponent = x * gamma - gamma * gamma / 2
    if total == 0:
        return 0j
    log_mag = exponent.real + math.log(abs(total))
    if not math.isfinite(log_mag) or log_mag > LOG_FLOAT_MAX:
        raise RangeError(f"|D_{q}^{r}| = exp({log_mag:.1f}) overflows", log_magnitude=log_mag)
    return total * np.exp(exponent)


class _PatternSide:
    """Vectorized D_q^r(sign*x, g) for one half of the derivative kernel."""

    def __init__(self, x, g, s, rmax, pmax):
        self.x = x
        self.g = g
        self.xpow = [np.ones_like(x)]
        for _ in range(rmax):
            self.xpow.append(self.xpow[-1] * x)
        self.herm = hermite_table(rmax, g / SQRT2)
        inv = 1.0 / s
        self.sinv = [np.ones_like(s)]
        for _ in range(pmax):
            self.sinv.append(self.sinv[-1] * inv)
        with np.errstate(over="ignore", invalid="ignore"):
            self.expo = np.exp(x * g - g * g / 2)
        self.cache = {}

    def D(self, q, r):
        if q < 0 or r < 0:
            return 0.0
        key = (q, r)
        if key not in self.cache:
            total = np.zeros(self.g.shape, dtype=complex)
            for k1, k2, k3 in compositions3(r):
                coef = _pattern_coefficient(q, r, k1, k2, k3)
                total = total + coef * self.xpow[k2] * self.herm[k3] * self.sinv[q + k1 + 1]
            with np.errstate(over="ignore", invalid="ignore"):
                self.cache[key] = total * self.expo
        return self.cache[key]


def _pattern_kernels(x, gamma, orders):
    gc = np.conj(gamma)
    s = 2.0 * gamma.real
    mmax = max(m for m, _ in orders)
    nmax = max(n for _, n in orders)
    rmax = max(mmax, nmax)
    pmax = mmax + nmax + 1
    side_a = _PatternSide(x, gamma, s, rmax, pmax)
    side_b = _PatternSide(-x, gc, s, rmax, pmax)
    out = {}
    with np.errstate(over="ignore", invalid="ignore"):
        for m, n in orders:
            out[(m, n)] = (m * side_a.D(n, m - 1) + gamma * side_a.D(n, m)
                           + n * side_b.D(m, n - 1) + gc * side_b.D(m, n))
    return out


def _confluent_kernels(x, gamma, orders):
    # d_g^m d_gc^n g[-gc, g] = (-1)^n int_0^1 t^m (1-t)^n g^(m+n+1)(z(t)) dt
    gc = np.conj(gamma)
    t = _GL_NODES
    z = -gc[:, None] + t[None, :] * (gamma + gc)[:, None]
    xx = x[:, None]
    pmax = max(m + n for m, n in orders) + 1
    herm = hermite_table(pmax, (z - xx) / SQRT2)
    with np.errstate(over="ignore", invalid="ignore"):
        expo = np.exp(xx * z - z * z / 2)
    # E^(s)(z) = (-1)^s 2^(-s/2) H_s((z - x)/sqrt2) E(z)
    e_der = [(-1) ** k * 2.0 ** (-k / 2) * herm[k] for k in range(pmax + 1)]
    out = {}
    with np.errstate(over="ignore", invalid="ignore"):
        for m, n in orders:
            p = m + n + 1
            gp = (z * e_der[p] + p * e_der[p - 1]) * expo
            weights = _GL_WEIGHTS * t**m * (1.0 - t) ** n
            out[(m, n)] = (-1) ** n * (gp @ weights)
    return out


def confluent_radius(max_order):
    """|gamma + gamma*| below which the pattern-function sum loses digits.

    Cancellation grows like |gamma + gamma*|^-(m+n+1); at these radii the two
    evaluation paths agree to ~1e-9 relative or better.
    """
    return min(0.5, 0.1 * (max_order + 1))


def derivative_kernels(x, phi, beta, orders):
    """Per-record kernels for each (m, n) in ``orders`` at one ``beta``.

    Their means estimate d_b^m d_b*^n Phi(beta).
    """
    orders = [tuple(o) for o in orders]
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if complex(beta) == 0:
        # degenerate divided difference: the Hermite moment kernel
        return {(m, n): (-1) ** n * moment_kernel(x, phi, m, n) for m, n in orders}
    gamma = complex(beta) * np.exp(1j * phi)
    far = np.abs(2.0 * gamma.real) >= confluent_radius(max(m + n for m, n in orders))
    out = {o: np.empty(x.shape, dtype=complex) for o in orders}
    if np.any(far):
        part = _pattern_kernels(x[far], gamma[far], orders)
        for o in orders:
            out[o][far] = part[o]
    near = ~far
    if np.any(near):
        part = _confluent_kernels(x[near], gamma[near], orders)
        for o in orders:
            out[o][near] = part[o]
    for m, n in orders:
        if m != n:
            out[(m, n)] *= np.exp(1j * (m - n) * phi)
    return out


def moment_kernel(x, phi, k, l):
    """Per-record kernel whose mean is <a^dag^k a^l>."""
    p = k + l
    coef = factorial(k) * factorial(l) / (2.0 ** (p / 2) * factorial(p))
    herm = hermite_table(p, np.asarray(x, dtype=float) / SQRT2)[p]
    return coef * herm * np.exp(1j * (k - l) * np.asarray(phi))


# ---------------------------------------------------------------------------
# estimators

def phase_uniformity(data, bins=20):
    """Chi-square test of the phase histogram against uniform on [0, pi)."""
    if bins < 2:
        raise DomainError("phase_uniformity needs at least 2 bins")
    counts, _ = np.histogram(data.phi, bins=bins, range=(0.0, math.pi))
    expected = data.M / bins
    chi2 = float(np.sum((counts - expected) ** 2) / expected)
    threshold = float(scipy.stats.chi2.ppf(0.999, bins - 1))
    return PhaseDiagnostic(chi2, threshold, bins, chi2 < threshold)


def _finish_estimate(acc, excluded, M):
    if excluded > MAX_EXCLUDED_FRACTION * M:
        raise DataQualityError(
            f"{excluded} of {M} records gave non-finite kernels (limit {MAX_EXCLUDED_FRACTION:.1%})")
    if acc.count == 0:
        raise InsufficientDataError("no usable records")
    return acc.mean, acc.covariance_of_mean()


def _accumulate(data, kernel_block, dim):
    """Fold ``kernel_block(x, phi) -> (n, dim) complex`` over the records."""
    acc = _Moments(2 * dim)
    excluded = 0
    for x, phi in data.chunks():
        block = kernel_block(x, phi)
        good = np.all(np.isfinite(block), axis=1)
        excluded += int(block.shape[0] - np.count_nonzero(good))
        acc.add(_complex_to_real(block[good]))
    mean, cov = _finish_estimate(acc, excluded, data.M)
    return mean, cov, acc.count, excluded


def sample_cf_direct(data, beta, phase_window=DEFAULT_PHASE_WINDOW):
    """Phi(beta) from records whose phase lies within ``phase_window`` of
    pi/2 - arg(beta) (mod pi)."""
    beta = complex(beta)
    if beta == 0:
        return ComplexEstimate(1 + 0j, np.zeros((2, 2)), data.M)
    target = math.pi / 2 - math.atan2(beta.imag, beta.real)
    d = data.phi - target
    wraps = np.round(d / math.pi)
    delta = d - wraps * math.pi
    sel = np.abs(delta) <= phase_window
    if not np.any(sel):
        raise InsufficientDataError(f"no records within {phase_window} rad of phase {target % math.pi:.4f}")
    # records a half-turn away see the quadrature with opposite sign
    x_eff = np.where(wraps[sel] % 2 == 0, 1.0, -1.0) * data.x[sel]
    r = abs(beta)
    kern = math.exp(r * r / 2) * np.exp(1j * r * x_eff)
    acc = _Moments(2)
    acc.add(_complex_to_real(kern[:, None]))
    return ComplexEstimate(complex(acc.mean[0], acc.mean[1]), acc.covariance_of_mean(), acc.count)


def sample_cf_derivative(data, order, beta, check_phases=True):
    """Estimate d_b^m d_b*^n Phi(beta) from all records."""
    return sample_cf_derivatives(data, [order], beta, check_phases)[tuple(int(v) for v in order)]


def sample_cf_derivatives(data, orders, beta, check_phases=True):
    """Several derivative orders at one ``beta`` in a single pass.

    Returns ``{(m, n): ComplexEstimate}``. A record whose kernel is non-finite
    for any order is dropped for all of them.
    """
    orders = [tuple(int(v) for v in o) for o in orders]
    if any(m < 0 or n < 0 for m, n in orders):
        raise DomainError(f"derivative orders must be non-negative, got {orders}")
    if check_phases:
        data.require_uniform()

    def block(x, phi):
        kern = derivative_kernels(x, phi, beta, orders)
        return np.column_stack([kern[o] for o in orders])

    mean, cov, count, excluded = _accumulate(data, block, len(orders))
    return {o: ComplexEstimate(complex(mean[2 * k], mean[2 * k + 1]), cov[2 * k:2 * k + 2, 2 * k:2 * k + 2].copy(),
                               count, excluded)
            for k, o in enumerate(orders)}


def sample_moment(data, k, l, check_phases=True):
    """Estimate the normally ordered moment <a^dag^k a^l>."""
    if k < 0 or l < 0:
        raise DomainError("moment orders must be non-negative")
    if check_phases:
        data.require_uniform()
    mean, cov, count, excluded = _accumulate(data, lambda x, phi: moment_kernel(x, phi, k, l)[:, None], 1)
    return ComplexEstimate(complex(mean[0], mean[1]), cov, count, excluded)


def _gbm_plan(spec):
    """Group the upper-triangle entries by argument so kernels share work."""
    plan = {}
    for i in range(spec.size):
        for j in range(i, spec.size):
            sign, order, arg = spec.element(i, j)
            plan.setdefault(arg, []).append((i, j, sign, tuple(order)))
    return plan


def estimate_gbm(data, spec, check_phases=True):
    """Estimate every GBM entry from the same records with full cross-covariance.

    Lower-triangle kernels are the per-record conjugates of the upper ones.
    """
    if check_phases:
        data.require_uniform()
    size = spec.size
    plan = _gbm_plan(spec)

    def block(x, phi):
        out = np.empty((x.size, size, size), dtype=complex)
        for arg, entries in plan.items():
            kern = derivative_kernels(x, phi, arg, sorted({e[3] for e in entries}))
            for i, j, sign, order in entries:
                out[:, i, j] = sign * kern[order]
                if i != j:
                    out[:, j, i] = np.conj(out[:, i, j])
        return out.reshape(x.size, size * size)

    mean, cov, count, excluded = _accumulate(data, block, size * size)
    values = (mean[0::2] + 1j * mean[1::2]).reshape(size, size)
    return EstimatedMatrix(values, cov, count, excluded, spec)


def cofactors(matrix):
    """Cofactor matrix C with C[i, j] = (-1)^(i+j) det(minor without row i, col j)."""
    matrix = np.asarray(matrix, dtype=complex)
    size = matrix.shape[0]
    if size == 1:
        return np.ones((1, 1), dtype=complex)
    out = np.empty_like(matrix)
    for i in range(size):
        for j in range(size):
            minor = np.delete(np.delete(matrix, i, axis=0), j, axis=1)
            out[i, j] = (-1) ** (i + j) * gbm.complex_det(minor)
    return out


def det_with_error(est, cov_mode="full"):
    """Determinant of an estimated matrix with linearly propagated error.

    ``cov_mode="diagonal"`` drops every off-diagonal covariance term.
    """
    values = est.values
    scale = np.max(np.abs(values))
    if np.max(np.abs(values - values.conj().T)) > 1e-9 * max(scale, 1.0):
        raise NumericalInconsistencyError("estimated matrix is not Hermitian")
    det = gbm.complex_det(values)
    cof = cofactors(values)
    # d(Re det) = Re(C) dRe(A) - Im(C) dIm(A)
    jac = np.empty(2 * values.size)
    jac[0::2] = cof.real.ravel()
    jac[1::2] = -cof.imag.ravel()
    if cov_mode == "full":
        cov = est.cov
    elif cov_mode == "diagonal":
        cov = np.diag(np.diag(est.cov))
    else:
        raise DomainError(f"cov_mode must be 'full' or 'diagonal', got {cov_mode!r}")
    var = float(jac @ cov @ jac)
    sigma = math.sqrt(max(var, 0.0))
    return gbm.CriterionResult.from_det(det.real, sigma)


def signed_significance(det, sigma):
    return det / sigma if sigma > 0 else math.nan


class DataSource:
    """CF provider backed by homodyne records; supports error-propagated criteria."""

    def __init__(self, data, cov_mode="full", check_phases=True):
        self.data = data
        self.cov_mode = cov_mode
        self.check_phases = check_phases

    def cf(self, beta):
        return sample_cf_derivative(self.data, (0, 0), beta, self.check_phases).value

    def cf_derivative(self, order, beta):
        return sample_cf_derivative(self.data, order, beta, self.check_phases).value

    def criterion(self, spec):
        return det_with_error(estimate_gbm(self.data, spec, self.check_phases), self.cov_mode)

    def describe(self):
        return {"source": "data", "records": self.data.M, "cov": self.cov_mode}
