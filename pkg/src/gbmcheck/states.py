"""Closed-form characteristic functions of a small catalog of single-mode states.

Conventions: the normally ordered characteristic function is
``Phi(beta) = <:exp(beta a^dag - conj(beta) a):>`` and the quadrature is
``x(phi) = exp(i phi) a + exp(-i phi) a^dag`` with vacuum variance 1.

Every catalog CF is a finite sum of terms ``P(beta, beta*) * exp(Q)`` where
``P`` is a polynomial in the two Wirtinger variables and ``Q`` is at most
quadratic. Wirtinger derivatives of such terms stay in the same family, so
``cf_derivative`` is exact: it differentiates the term list symbolically and
evaluates the result.
"""

import cmath
import functools
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, UnsupportedOrderError

MAX_ORDER = 8


class DerivativeOrder(NamedTuple):
    """Derivative order ``m`` in beta and ``n`` in conj(beta)."""

    m: int
    n: int


# ---------------------------------------------------------------------------
# polynomial x exponential algebra

@dataclass(frozen=True)
class _Term:
    # poly maps (i, j) -> coefficient of beta^i conj(beta)^j
    poly: tuple
    # exponent: a*b + ab*bc + c*b^2 + d*bc^2 + e*b*bc
    a: complex = 0j
    ab: complex = 0j
    c: complex = 0j
    d: complex = 0j
    e: complex = 0j

    def d_beta(self):
        out = {}
        for (i, j), coef in self.poly:
            if i:
                _acc(out, (i - 1, j), coef * i)
            _acc(out, (i, j), coef * self.a)
            _acc(out, (i + 1, j), coef * 2 * self.c)
            _acc(out, (i, j + 1), coef * self.e)
        return self._with(out)

    def d_beta_conj(self):
        out = {}
        for (i, j), coef in self.poly:
            if j:
                _acc(out, (i, j - 1), coef * j)
            _acc(out, (i, j), coef * self.ab)
            _acc(out, (i, j + 1), coef * 2 * self.d)
            _acc(out, (i + 1, j), coef * self.e)
        return self._with(out)

    def _with(self, poly):
        poly = tuple(sorted((k, v) for k, v in poly.items() if v != 0))
        return _Term(poly, self.a, self.ab, self.c, self.d, self.e)

    def evaluate(self, beta):
        bc = np.conj(beta)
        q = self.a * beta + self.ab * bc + self.c * beta**2 + self.d * bc**2 + self.e * beta * bc
        p = 0j
        for (i, j), coef in self.poly:
            p = p + coef * beta**i * bc**j
        return p * np.exp(q)


def _acc(d, key, value):
    if value != 0:
        d[key] = d.get(key, 0) + value


def _poly_in_modulus(coeffs, scale=1.0):
    """Polynomial sum_k coeffs[k] (scale |beta|^2)^k as a term polynomial."""
    return tuple(((k, k), complex(c * scale**k)) for k, c in enumerate(coeffs) if c != 0)


def _laguerre_coeffs(n):
    return [(-1) ** k * math.comb(n, k) / math.factorial(k) for k in range(n + 1)]


# ---------------------------------------------------------------------------
# state catalog

class StateModel:
    """Base class of the catalog. Instances are immutable and hashable."""

    kind = None
    classical = False

    def terms(self):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class Coherent(StateModel):
    alpha: complex = 0j
    kind = "coherent"
    classical = True

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))

    def terms(self):
        a = self.alpha
        return (_Term(((((0, 0), 1 + 0j),)), a=a.conjugate(), ab=-a),)

    def to_dict(self):
        return {"type": self.kind, "alpha": [self.alpha.real, self.alpha.imag]}


@dataclass(frozen=True)
class Thermal(StateModel):
    nbar: float = 0.0
    kind = "thermal"
    classical = True

    def __post_init__(self):
        if not self.nbar >= 0:
            raise ConfigurationError(f"thermal nbar must be >= 0, got {self.nbar}")

    def terms(self):
        return (_Term((((0, 0), 1 + 0j),), e=-self.nbar),)

    def to_dict(self):
        return {"type": self.kind, "nbar": self.nbar}


@dataclass(frozen=True)
class Fock(StateModel):
    n: int = 0
    kind = "fock"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ConfigurationError(f"Fock number must be a non-negative integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def classical(self):
        return self.n == 0

    def terms(self):
        return (_Term(_poly_in_modulus(_laguerre_coeffs(self.n))),)

    def to_dict(self):
        return {"type": self.kind, "n": self.n}


@dataclass(frozen=True)
class PhotonAddedThermal(StateModel):
    """Thermal state with ``k`` photons added: CF = L_k((1+nbar)|b|^2) exp(-nbar|b|^2)."""

    k: int = 1
    nbar: float = 0.0
    kind = "photon_added_thermal"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ConfigurationError(f"added photon number must be a non-negative integer, got {self.k}")
        if not self.nbar >= 0:
            raise ConfigurationError(f"nbar must be >= 0, got {self.nbar}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def classical(self):
        return self.k == 0

    def terms(self):
        poly = _poly_in_modulus(_laguerre_coeffs(self.k), scale=1.0 + self.nbar)
        return (_Term(poly, e=-self.nbar),)

    def to_dict(self):
        return {"type": self.kind, "k": self.k, "nbar": self.nbar}


@dataclass(frozen=True)
class SqueezedVacuum(StateModel):
    """Gaussian vacuum with principal quadrature variances ``vmin <= vmax``.

    ``theta`` is the local-oscillator phase of the anti-squeezed quadrature:
    ``Var x(phi) = vmax cos^2(phi - theta) + vmin sin^2(phi - theta)``.
    """

    vmin: float = 1.0
    vmax: float = 1.0
    theta: float = 0.0
    kind = "squeezed_vacuum"

    def __post_init__(self):
        if not (self.vmin > 0 and self.vmax > 0):
            raise ConfigurationError("squeezed-vacuum variances must be positive")
        if self.vmin > self.vmax:
            raise ConfigurationError(f"vmin={self.vmin} exceeds vmax={self.vmax}")

    @classmethod
    def from_db(cls, squeezing_db, antisqueezing_db, theta=0.0):
        """Variances from dB relative to vacuum, ``V = 10**(dB/10)``."""
        return cls(10 ** (squeezing_db / 10), 10 ** (antisqueezing_db / 10), theta)

    @property
    def classical(self):
        return self.vmin >= 1.0

    def quadrature_variance(self, phi):
        return self.vmax * np.cos(phi - self.theta) ** 2 + self.vmin * np.sin(phi - self.theta) ** 2

    def terms(self):
        # Phi = exp(|b|^2 (1 - V(pi/2 - arg b)) / 2), written in b, conj(b)
        e = 0.5 * (1.0 - 0.5 * (self.vmax + self.vmin))
        c = (self.vmax - self.vmin) / 8.0 * cmath.exp(2j * self.theta)
        return (_Term((((0, 0), 1 + 0j),), c=c, d=c.conjugate(), e=e),)

    def to_dict(self):
        return {"type": self.kind, "vmin": self.vmin, "vmax": self.vmax, "theta": self.theta}


@dataclass(frozen=True)
class Mixture(StateModel):
    weights: tuple = ()
    components: tuple = ()
    kind = "mixture"

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        components = tuple(self.components)
        if len(weights) != len(components) or not weights:
            raise ConfigurationError("mixture needs one weight per component")
        if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-12:
            raise ConfigurationError(f"mixture weights must be non-negative and sum to 1, got {weights}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @property
    def classical(self):
        return all(c.classical for c in self.components)

    def terms(self):
        out = []
        for w, comp in zip(self.weights, self.components):
            for t in comp.terms():
                out.append(_Term(tuple((k, v * w) for k, v in t.poly), t.a, t.ab, t.c, t.d, t.e))
        return tuple(out)

    def to_dict(self):
        return {
            "type": self.kind,
            "weights": list(self.weights),
            "components": [c.to_dict() for c in self.components],
        }


def photon_added_mixture():
    """Thermal state mixed with three- and four-photon-added thermal states."""
    return Mixture(
        (0.944, 0.03, 0.026),
        (Thermal(0.1), PhotonAddedThermal(3, 0.12), PhotonAddedThermal(4, 0.182)),
    )


def reference_squeezed(theta=0.0):
    """Squeezed vacuum at -4.13 dB / +6.11 dB (variances as detected)."""
    return SqueezedVacuum.from_db(-4.13, 6.11, theta)


NAMED_STATES = {
    "vacuum": lambda: Thermal(0.0),
    "squeezed": reference_squeezed,
    "pat-mixture": photon_added_mixture,
}


def state_from_dict(d):
    try:
        kind = d["type"]
        if kind == "coherent":
            a = d.get("alpha", 0)
            alpha = complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a)
            return Coherent(alpha)
        if kind == "thermal":
            return Thermal(float(d["nbar"]))
        if kind == "fock":
            return Fock(d["n"])
        if kind == "photon_added_thermal":
            return PhotonAddedThermal(d["k"], float(d.get("nbar", 0.0)))
        if kind == "squeezed_vacuum":
            theta = float(d.get("theta", 0.0))
            if "squeezing_db" in d:
                return SqueezedVacuum.from_db(float(d["squeezing_db"]), float(d["antisqueezing_db"]), theta)
            return SqueezedVacuum(float(d["vmin"]), float(d["vmax"]), theta)
        if kind == "mixture":
            return Mixture(tuple(d["weights"]), tuple(state_from_dict(c) for c in d["components"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigurationError(f"malformed state description {d!r}: {exc}") from exc
    raise ConfigurationError(f"unknown state type {d.get('type')!r}")


def state_from_json(text):
    """Parse a JSON state description, or look up a named state."""
    if text in NAMED_STATES:
        return NAMED_STATES[text]()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"state is neither a known name nor valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigurationError("state JSON must be an object")
    return state_from_dict(d)


# ---------------------------------------------------------------------------
# operations

@functools.lru_cache(maxsize=512)
def _derivative_terms(state, m, n):
    terms = state.terms()
    for _ in range(m):
        terms = tuple(t.d_beta() for t in terms)
    for _ in range(n):
        terms = tuple(t.d_beta_conj() for t in terms)
    return terms


def _as_beta(beta):
    return np.asarray(beta, dtype=complex)


def _finish(value):
    value = np.asarray(value, dtype=complex)
    return complex(value) if value.ndim == 0 else value


def cf(state, beta):
    """Characteristic function at ``beta`` (scalar or array)."""
    beta = _as_beta(beta)
    total = np.zeros(beta.shape, dtype=complex)
    for t in state.terms():
        total = total + t.evaluate(beta)
    # Phi(0) = 1 exactly; polynomial coefficients may round
    total = np.where(beta == 0, 1.0 + 0j, total)
    return _finish(total)


def _check_derivative_order(m, n):
    if m < 0 or n < 0 or int(m) != m or int(n) != n:
        raise UnsupportedOrderError(f"derivative orders must be non-negative integers, got ({m}, {n})")
    if m + n > MAX_ORDER:
        raise UnsupportedOrderError(f"derivative order m+n={m + n} exceeds catalog limit {MAX_ORDER}")


def cf_derivative(state, order, beta):
    """Wirtinger derivative d^m/dbeta^m d^n/dbeta*^n of the CF at ``beta``."""
    m, n = order
    _check_derivative_order(m, n)
    if m == 0 and n == 0:
        return cf(state, beta)
    beta = _as_beta(beta)
    total = np.zeros(beta.shape, dtype=complex)
    for t in _derivative_terms(state, int(m), int(n)):
        total = total + t.evaluate(beta)
    return _finish(total)


def moment(state, k, l):
    """Normally ordered moment <a^dag^k a^l>."""
    _check_derivative_order(k, l)
    if isinstance(state, Coherent):
        a = state.alpha
        return complex(a.conjugate() ** k * a**l)
    if isinstance(state, Thermal):
        return complex(math.factorial(k) * state.nbar**k) if k == l else 0j
    return (-1) ** l * cf_derivative(state, (k, l), 0j)


def mean_photon_number(state):
    return moment(state, 1, 1).real


def finite_difference_derivative(func, order, beta, step=None):
    """Wirtinger derivative of ``func`` by nested central differences.

    One Richardson extrapolation step (h, h/2) is applied. The default step is
    1e-4 for first order and grows with the order to balance rounding.
    """
    m, n = order
    p = m + n
    if p == 0:
        return complex(func(beta))
    if step is None:
        step = 1e-4 if p <= 1 else np.finfo(float).eps ** (1.0 / (p + 4))

    def nested(h):
        # each Wirtinger factor is (d_x -+ i d_y)/2
        ops = [-1j] * m + [1j] * n

        def apply(k, b):
            if k == len(ops):
                return complex(func(b))
            dx = (apply(k + 1, b + h) - apply(k + 1, b - h)) / (2 * h)
            dy = (apply(k + 1, b + 1j * h) - apply(k + 1, b - 1j * h)) / (2 * h)
            return 0.5 * (dx + ops[k] * dy)

        return apply(0, complex(beta))

    coarse = nested(step)
    fine = nested(step / 2)
    return (4 * fine - coarse) / 3


def is_phase_insensitive(state):
    if isinstance(state, Mixture):
        return all(is_phase_insensitive(c) for c in state.components)
    return isinstance(state, (Thermal, Fock, PhotonAddedThermal))


def photon_number_distribution(state, tol=1e-16, nmax=400):
    """Diagonal Fock-basis populations of a phase-insensitive state."""
    if isinstance(state, Fock):
        p = np.zeros(state.n + 1)
        p[state.n] = 1.0
        return p
    if isinstance(state, Thermal):
        return _thermal_populations(state.nbar, 0, tol, nmax)
    if isinstance(state, PhotonAddedThermal):
        return _thermal_populations(state.nbar, state.k, tol, nmax)
    if isinstance(state, Mixture):
        parts = [w * photon_number_distribution(c, tol, nmax) for w, c in zip(state.weights, state.components)]
        size = max(len(p) for p in parts)
        out = np.zeros(size)
        for p in parts:
            out[: len(p)] += p
        return out
    raise ConfigurationError(f"{state.kind} has no diagonal photon-number representation")


def _thermal_populations(nbar, k, tol, nmax):
    # a^dag^k rho_th a^k: P(n) ~ n!/(n-k)! * nbar^(n-k) / (1+nbar)^(n-k+1), n >= k
    if nbar == 0:
        p = np.zeros(k + 1)
        p[k] = 1.0
        return p
    q = nbar / (1.0 + nbar)
    ns = np.arange(k, nmax + 1)
    logp = (
        np.array([math.lgamma(x + 1) - math.lgamma(x - k + 1) for x in ns])
        - math.lgamma(k + 1)
        + (ns - k) * math.log(q)
        + (k + 1) * math.log(1.0 - q)
    )
    p = np.exp(logp)
    keep = np.nonzero(p > tol)[0]
    last = keep[-1] + 1 if len(keep) else 1
    out = np.zeros(k + last)
    out[k:] = p[:last]
    return out / out.sum()

