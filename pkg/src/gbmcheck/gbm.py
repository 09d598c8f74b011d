"""Generalized Bochner matrices, determinant criteria and phase-space scans.

A criterion is selected by a :class:`GbmSpec` ``(n, m, betas)``. The matrix
element ``(i, j)`` is

    (-1)**(n_i + m_i) * d_b**(n_i + m_j) d_b***(n_j + m_i) Phi(b) at b = beta_i - beta_j

and is positive semidefinite for every classical state, so a negative
determinant certifies nonclassicality.

Sources of ``Phi`` derivatives ("CF providers") only need two methods,
``cf(beta)`` and ``cf_derivative(order, beta)``. :class:`AnalyticSource` wraps
a catalog state; the estimator module provides a data-backed source that in
addition implements ``criterion(spec)`` with error propagation.
"""

import cmath
import json
import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import states
from .errors import ConfigurationError, GbmError, NumericalInconsistencyError

HERMITIAN_RTOL = 1e-9
DET_IMAG_RTOL = 1e-8


@dataclass(frozen=True)
class GbmSpec:
    n: tuple
    m: tuple
    betas: tuple

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        m = tuple(int(v) for v in self.m)
        betas = tuple(complex(b) for b in self.betas)
        if not (len(n) == len(m) == len(betas)) or not n:
            raise ConfigurationError(f"GbmSpec vectors must share a length >= 1: {len(n)}, {len(m)}, {len(betas)}")
        if min(n + m) < 0:
            raise ConfigurationError("derivative orders must be non-negative")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "betas", betas)

    @property
    def size(self):
        return len(self.n)

    def element(self, i, j):
        """(sign, (order in beta, order in beta*), argument) of entry (i, j)."""
        sign = -1 if (self.n[i] + self.m[i]) % 2 else 1
        order = states.DerivativeOrder(self.n[i] + self.m[j], self.n[j] + self.m[i])
        return sign, order, self.betas[i] - self.betas[j]

    def max_order(self):
        return max(self.n[i] + self.m[j] + self.n[j] + self.m[i] for i in range(self.size) for j in range(self.size))

    def permuted(self, perm):
        return GbmSpec([self.n[p] for p in perm], [self.m[p] for p in perm], [self.betas[p] for p in perm])

    def to_dict(self):
        return {"n": list(self.n), "m": list(self.m), "betas": [[b.real, b.imag] for b in self.betas]}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        try:
            betas = [complex(b[0], b[1]) if isinstance(b, (list, tuple)) else complex(b) for b in d["betas"]]
            return cls(d["n"], d["m"], betas)
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise ConfigurationError(f"malformed GbmSpec {d!r}: {exc}") from exc

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"GbmSpec is not valid JSON: {exc}") from exc


@dataclass
class CriterionResult:
    """Determinant, its standard deviation and signed significance.

    ``significance`` is NaN and ``flag`` is set whenever ``sigma`` is zero.
    """

    det: float
    sigma: float = 0.0
    significance: float = math.nan
    flag: str = None

    @classmethod
    def from_det(cls, det, sigma=0.0, analytic=False):
        det = float(det)
        sigma = float(sigma)
        if sigma > 0:
            return cls(det, sigma, det / sigma, None)
        if analytic:
            return cls(det, 0.0, math.nan, "analytic")
        # zero spread from a statistical source: only legitimate for exact entries
        return cls(det, 0.0, math.nan, "zero-variance" if det == 0 else "analytic-input")

    def to_dict(self):
        def clean(v):
            return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v

        return {"det": clean(self.det), "sigma": clean(self.sigma),
                "significance": clean(self.significance), "flag": self.flag}


class AnalyticSource:
    """CF provider backed by a closed-form catalog state."""

    def __init__(self, state):
        self.state = state

    def cf(self, beta):
        return states.cf(self.state, beta)

    def cf_derivative(self, order, beta):
        return states.cf_derivative(self.state, order, beta)

    def describe(self):
        return {"source": "analytic", "state": self.state.to_dict()}


def _as_source(source):
    if isinstance(source, states.StateModel):
        return AnalyticSource(source)
    return source


def check_hermitian(matrix, rtol=HERMITIAN_RTOL):
    matrix = np.asarray(matrix)
    scale = np.max(np.abs(matrix)) if matrix.size else 0.0
    dev = np.max(np.abs(matrix - matrix.conj().T)) if matrix.size else 0.0
    if dev > rtol * scale:
        raise NumericalInconsistencyError(
            f"matrix not Hermitian: max |M - M^H| = {dev:.3e} vs tolerance {rtol * scale:.3e}")
    return matrix


def build_gbm(source, spec):
    """Evaluate the generalized Bochner matrix of ``spec`` on ``source``."""
    source = _as_source(source)
    size = spec.size
    out = np.empty((size, size), dtype=complex)
    for i in range(size):
        for j in range(size):
            sign, order, arg = spec.element(i, j)
            if order == (0, 0):
                value = source.cf(arg)
            else:
                value = source.cf_derivative(order, arg)
            out[i, j] = sign * value
    return check_hermitian(out)


def det_hermitian(matrix):
    """Real determinant of a Hermitian matrix via pivoted LU."""
    matrix = check_hermitian(np.asarray(matrix, dtype=complex))
    det = complex_det(matrix)
    if abs(det.imag) > DET_IMAG_RTOL * (abs(det.real) + 1.0):
        raise NumericalInconsistencyError(f"determinant has imaginary part {det.imag:.3e}")
    return det.real


def complex_det(matrix):
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape == (1, 1):
        return complex(matrix[0, 0])
    with warnings.catch_warnings():
        # exactly singular matrices are legitimate (det = 0 on the classical boundary)
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix, check_finite=True)
    sign = -1.0 if np.count_nonzero(piv != np.arange(len(piv))) % 2 else 1.0
    return complex(sign * np.prod(np.diag(lu)))


def evaluate(source, spec):
    """Determinant criterion as a :class:`CriterionResult`."""
    source = _as_source(source)
    if hasattr(source, "criterion"):
        return source.criterion(spec)
    return CriterionResult.from_det(det_hermitian(build_gbm(source, spec)), analytic=True)


# ---------------------------------------------------------------------------
# presets

def bochner2(beta):
    return GbmSpec((0, 0), (0, 0), (beta, 0))


def example3x3(beta):
    return GbmSpec((0, 0, 1), (0, 1, 0), (beta, 0, beta))


def squeezing():
    return example3x3(0)


def mom2():
    return GbmSpec((0, 1), (0, 0), (0, 0))


def gbm2(beta):
    return GbmSpec((0, 1), (0, 0), (beta, 0))


PRESETS = {
    "bochner2": bochner2,
    "example3x3": example3x3,
    "squeezing": lambda beta=0: squeezing(),
    "mom2": lambda beta=0: mom2(),
    "gbm2": gbm2,
}

_PRESET_RE = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


def parse_complex(text):
    text = str(text).strip()
    if "," in text:
        re_part, im_part = text.split(",", 1)
        return complex(float(re_part), float(im_part))
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse complex number {text!r}") from exc


def preset_family(name):
    """Map ``name`` to a function beta -> GbmSpec."""
    base = _PRESET_RE.match(name).group(1) if _PRESET_RE.match(name) else name
    if base not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[base]


def preset(name, beta=None):
    """Spec for a named criterion, e.g. ``preset("gbm2", 5.8)`` or ``preset("gbm2(5.8)")``."""
    match = _PRESET_RE.match(name)
    if not match:
        raise ConfigurationError(f"unknown preset {name!r}")
    base, arg = match.groups()
    family = preset_family(base)
    if arg:
        beta = parse_complex(arg)
    return family(0 if beta is None else beta)


def quadrature_extremes(source):
    """Phases and normally ordered variances of the extremal quadratures.

    Returns ``(phi_min, var_min, phi_max, var_max)`` where the variances are
    ``<:[Delta x(phi)]^2:>``. For phase-symmetric states ``phi_min = 0``.
    """
    source = _as_source(source)
    # <a^dag^k a^l> = (-1)^l d^k d*^l Phi(0)
    a = -source.cf_derivative((0, 1), 0j)
    n = -source.cf_derivative((1, 1), 0j)
    a2 = source.cf_derivative((0, 2), 0j)
    d_n = (n - abs(a) ** 2).real
    d_a2 = a2 - a**2
    # <:dx(phi)^2:> = 2 <:da^dag da:> + 2 Re(e^{2 i phi} <da^2>)
    if abs(d_a2) < 1e-14:
        phi_min = 0.0
    else:
        phi_min = ((math.pi - cmath.phase(d_a2)) / 2) % math.pi
    phi_max = (phi_min + math.pi / 2) % math.pi

    def var(phi):
        return 2 * d_n + 2 * (cmath.exp(2j * phi) * d_a2).real

    return phi_min, var(phi_min), phi_max, var(phi_max)


# ---------------------------------------------------------------------------
# scans

def lattice(re_min, re_max, re_step, im_min, im_max, im_step):
    """Row-major (Re outer, Im inner) lattice of complex points, bounds inclusive."""
    for v in (re_step, im_step):
        if not (math.isfinite(v) and v > 0):
            raise ConfigurationError(f"grid steps must be finite and positive, got {v}")
    for v in (re_min, re_max, im_min, im_max):
        if not math.isfinite(v):
            raise ConfigurationError("grid bounds must be finite")
    if re_max < re_min or im_max < im_min:
        raise ConfigurationError("grid upper bound below lower bound")
    re_vals = re_min + re_step * np.arange(int(math.floor((re_max - re_min) / re_step + 1e-9)) + 1)
    im_vals = im_min + im_step * np.arange(int(math.floor((im_max - im_min) / im_step + 1e-9)) + 1)
    return (re_vals[:, None] + 1j * im_vals[None, :]).ravel()


def parse_grid(text):
    """Parse ``remin:remax:step,immin:immax:step``."""
    try:
        re_part, im_part = text.split(",")
        r = [float(v) for v in re_part.split(":")]
        i = [float(v) for v in im_part.split(":")]
        if len(r) != 3 or len(i) != 3:
            raise ValueError("need three fields per axis")
    except ValueError as exc:
        raise ConfigurationError(f"bad grid {text!r}: {exc}") from exc
    return lattice(r[0], r[1], r[2], i[0], i[1], i[2])


@dataclass
class ScanResult:
    points: np.ndarray
    det: np.ndarray
    sigma: np.ndarray
    significance: np.ndarray
    status: list = field(default_factory=list)

    def masked_significance(self, threshold=5.0):
        """Significance with ``|value| < threshold`` replaced by NaN."""
        sig = self.significance.copy()
        sig[np.abs(sig) < threshold] = np.nan
        return sig

    @property
    def n_failed(self):
        return sum(s != "ok" for s in self.status)


def grid_scan(source, family, points):
    """Evaluate ``family(beta)`` at every point; failures are recorded per point."""
    source = _as_source(source)
    points = np.asarray(points, dtype=complex).ravel()
    det = np.full(points.shape, np.nan)
    sigma = np.full(points.shape, np.nan)
    sig = np.full(points.shape, np.nan)
    status = ["ok"] * len(points)
    for idx, beta in enumerate(points):
        try:
            res = evaluate(source, family(complex(beta)))
        except (GbmError, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            status[idx] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
            continue
        det[idx], sigma[idx], sig[idx] = res.det, res.sigma, res.significance
    return ScanResult(points, det, sigma, sig, status)
