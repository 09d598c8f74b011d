"""Synthetic balanced-homodyne data.

Records are ``(x_j, phi_j)`` with the local-oscillator phase either drawn
uniformly or swept with a triangular ramp, as a piezo-driven mirror does.
Detection efficiency ``eta`` mixes the signal with vacuum noise,
``x -> sqrt(eta) x + sqrt(1 - eta) x_vac``; for Gaussian states this is the
map ``V -> eta V + 1 - eta`` on variances and ``mean -> sqrt(eta) mean``.

Random numbers come from numpy's PCG64. Record block ``b`` of a run seeded
with ``seed`` always uses ``SeedSequence(seed, spawn_key=(b,))``, so output
does not depend on how blocks are scheduled.
"""

import functools
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import states
from .errors import ConfigurationError, InsufficientDataError, ParseError, UnsupportedStateError
from .estimator import QuadratureDataset

log = logging.getLogger(__name__)

BLOCK = 1 << 16
TABLE_NODES = 4096
HEADER = "x,phi"


@dataclass(frozen=True)
class SimConfig:
    state: states.StateModel
    efficiency: float = 1.0
    samples: int = 100_000
    seed: int = 0
    phase_mode: str = "sweep"
    period: int = 4096

    def __post_init__(self):
        if not (0.0 < self.efficiency <= 1.0):
            raise ConfigurationError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if int(self.samples) != self.samples or self.samples < 1:
            raise ConfigurationError(f"samples must be a positive integer, got {self.samples}")
        if self.phase_mode not in ("uniform", "sweep"):
            raise ConfigurationError(f"phase_mode must be 'uniform' or 'sweep', got {self.phase_mode!r}")
        if self.period < 2:
            raise ConfigurationError("sweep period must be at least 2 samples")
        if not (0 <= self.seed < 2**64):
            raise ConfigurationError("seed must be an unsigned 64-bit integer")

    def to_dict(self):
        return {"state": self.state.to_dict(), "efficiency": self.efficiency, "samples": self.samples,
                "seed": self.seed, "phase_mode": self.phase_mode, "period": self.period}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        state = d.pop("state")
        state = states.state_from_dict(state) if isinstance(state, dict) else states.state_from_json(state)
        known = {"efficiency", "samples", "seed", "phase_mode", "period"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown SimConfig keys {sorted(unknown)}")
        return cls(state, **d)

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            raise ConfigurationError(f"bad SimConfig JSON: {exc}") from exc


def squeezed_source(squeezing_db, antisqueezing_db, efficiency, db_refers_to="detected", theta=0.0):
    """Squeezed vacuum to feed the simulator at ``efficiency``.

    With ``db_refers_to="detected"`` the dB values describe the data after loss,
    so the source variances are back-transformed ``V -> (V - 1 + eta) / eta``.
    With ``"source"`` they describe the state before loss.
    """
    detected = states.SqueezedVacuum.from_db(squeezing_db, antisqueezing_db, theta)
    if db_refers_to == "source":
        return detected
    if db_refers_to != "detected":
        raise ConfigurationError("db_refers_to must be 'detected' or 'source'")
    eta = efficiency
    vmin = (detected.vmin - 1 + eta) / eta
    vmax = (detected.vmax - 1 + eta) / eta
    if vmin <= 0:
        raise ConfigurationError(f"{squeezing_db} dB cannot be detected at efficiency {eta}")
    return states.SqueezedVacuum(vmin, vmax, theta)


# ---------------------------------------------------------------------------
# phases

def _phases(config, start, count, rng):
    if config.phase_mode == "uniform":
        return rng.uniform(0.0, math.pi, count)
    idx = np.arange(start, start + count)
    t = (idx % config.period) / config.period
    phi = math.pi * np.where(t < 0.5, 2.0 * t, 2.0 - 2.0 * t)
    phi[phi >= math.pi] -= math.pi
    return phi


# ---------------------------------------------------------------------------
# per-state samplers: (rng, phi, eta) -> x

def hermite_functions(nmax, X):
    """Normalized oscillator eigenfunctions psi_0..psi_nmax at position X."""
    X = np.asarray(X, dtype=float)
    out = np.empty((nmax + 1,) + X.shape)
    out[0] = math.pi ** -0.25 * np.exp(-X * X / 2)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * X * out[0]
    for k in range(1, nmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * X * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def quadrature_density(state, x):
    """Phase-independent quadrature density of a diagonal (phase-insensitive) state."""
    pops = states.photon_number_distribution(state)
    psi = hermite_functions(len(pops) - 1, np.asarray(x) / math.sqrt(2.0))
    # x = sqrt2 X, so p(x) = |psi(x/sqrt2)|^2 / sqrt2
    return (pops[:, None] * psi.reshape(len(pops), -1) ** 2).sum(axis=0).reshape(np.shape(x)) / math.sqrt(2.0)


@functools.lru_cache(maxsize=64)
def _inverse_cdf_table(state):
    pops = states.photon_number_distribution(state)
    top = len(pops) - 1
    half_width = 6.0 + 2.0 * math.sqrt(top)
    grid = np.linspace(-half_width, half_width, TABLE_NODES)
    dens = quadrature_density(state, grid)
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))))
    cdf /= cdf[-1]
    return grid, cdf


def _gaussian(mean, var, eta):
    def sample(rng, phi):
        m = mean(phi) if callable(mean) else mean
        v = var(phi) if callable(var) else var
        return math.sqrt(eta) * m + np.sqrt(eta * v + 1.0 - eta) * rng.standard_normal(phi.shape)

    return sample


def _sampler(state, eta):
    if isinstance(state, states.Coherent):
        alpha = state.alpha
        return _gaussian(lambda phi: 2.0 * np.real(alpha * np.exp(1j * phi)), 1.0, eta)
    if isinstance(state, states.Thermal):
        return _gaussian(0.0, 1.0 + 2.0 * state.nbar, eta)
    if isinstance(state, states.SqueezedVacuum):
        return _gaussian(0.0, state.quadrature_variance, eta)
    if isinstance(state, states.Mixture):
        subs = [_sampler(c, eta) for c in state.components]
        weights = np.asarray(state.weights)

        def sample(rng, phi):
            which = rng.choice(len(subs), size=phi.shape, p=weights)
            x = np.empty(phi.shape)
            for k, sub in enumerate(subs):
                sel = which == k
                if np.any(sel):
                    x[sel] = sub(rng, phi[sel])
            return x

        return sample
    if isinstance(state, (states.Fock, states.PhotonAddedThermal)):
        grid, cdf = _inverse_cdf_table(state)

        def sample(rng, phi):
            x = np.interp(rng.uniform(0.0, 1.0, phi.shape), cdf, grid)
            if eta < 1.0:
                x = math.sqrt(eta) * x + math.sqrt(1.0 - eta) * rng.standard_normal(phi.shape)
            return x

        return sample
    raise UnsupportedStateError(f"cannot simulate homodyne data for {state.kind}")


def generate(config):
    """Simulate ``config.samples`` homodyne records; deterministic in ``config.seed``."""
    sampler = _sampler(config.state, config.efficiency)
    xs, phis = [], []
    for block, start in enumerate(range(0, config.samples, BLOCK)):
        count = min(BLOCK, config.samples - start)
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(block,)))
        phi = _phases(config, start, count, rng)
        xs.append(sampler(rng, phi))
        phis.append(phi)
    return QuadratureDataset(np.concatenate(xs), np.concatenate(phis))


# ---------------------------------------------------------------------------
# file format

def write_dataset(data, path):
    """Write ``x,phi`` CSV with 17 significant digits (exact round trip)."""
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        np.savetxt(fh, np.column_stack([data.x, data.phi]), fmt="%.17g", delimiter=",")


def read_dataset(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if header != HEADER:
            raise ParseError(f"expected header {HEADER!r}, got {header!r}", line=1)
        text = fh.read()
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise InsufficientDataError(f"{path}: no records")
    try:
        table = np.loadtxt(lines, delimiter=",", dtype=float, ndmin=2)
        if table.shape[1] != 2:
            raise ValueError("need two columns")
    except ValueError:
        _locate_parse_error(lines)
        raise
    if not np.all(np.isfinite(table)):
        _locate_parse_error(lines)
    x, phi = table[:, 0], table[:, 1]
    outside = (phi < 0) | (phi >= math.pi)
    if np.any(outside):
        log.warning("%s: %d phases outside [0, pi) folded back", path, int(np.count_nonzero(outside)))
        return QuadratureDataset.folded(x, phi)
    return QuadratureDataset(x, phi)


def _locate_parse_error(lines):
    for offset, line in enumerate(lines):
        if not line.strip():
            continue
        fields = line.split(",")
        try:
            if len(fields) != 2:
                raise ValueError(f"expected 2 fields, found {len(fields)}")
            values = [float(f) for f in fields]
            if not all(math.isfinite(v) for v in values):
                raise ValueError("non-finite value")
        except ValueError as exc:
            raise ParseError(f"malformed record {line!r}: {exc}", line=offset + 2) from None
