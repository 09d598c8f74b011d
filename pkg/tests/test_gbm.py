import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbmcheck import gbm, states
from gbmcheck.errors import ConfigurationError, NumericalInconsistencyError

SQUEEZED = states.SqueezedVacuum(0.386, 4.083)
CLASSICAL = [
    states.Coherent(0.8 + 0.3j),
    states.Thermal(0.25),
    states.Mixture((0.3, 0.7), (states.Coherent(-0.5j), states.Thermal(0.1))),
    states.Mixture((0.5, 0.5), (states.Coherent(1.0), states.Coherent(-1.0))),
]


def random_spec(rng, size=None, max_order=2, rmax=2.0):
    size = size or int(rng.integers(1, 5))
    r = rmax * np.sqrt(rng.uniform(size=size))
    betas = r * np.exp(2j * np.pi * rng.uniform(size=size))
    return gbm.GbmSpec(rng.integers(0, max_order + 1, size), rng.integers(0, max_order + 1, size), betas)


def test_bochner_reduction_thermal():
    nbar, b1, b2 = 0.3, 0.4 + 0.2j, -0.7j
    mat = gbm.build_gbm(states.Thermal(nbar), gbm.GbmSpec((0, 0), (0, 0), (b1, b2)))
    off = math.exp(-nbar * abs(b1 - b2) ** 2)
    np.testing.assert_allclose(mat, [[1, off], [off, 1]], rtol=1e-14)


def test_single_entry():
    for state in (SQUEEZED, states.Fock(2)):
        assert gbm.build_gbm(state, gbm.GbmSpec((0,), (0,), (0,))).tolist() == [[1]]


def test_squeezing_closed_form():
    det = gbm.det_hermitian(gbm.build_gbm(SQUEEZED, gbm.squeezing()))
    assert det == pytest.approx(0.25 * (0.386 - 1) * (4.083 - 1), rel=1e-12)
    assert det == pytest.approx(-0.473, abs=1e-3)


@pytest.mark.parametrize("state", [
    states.SqueezedVacuum(0.5, 3.0, 1.1), states.SqueezedVacuum(0.9, 1.2, -0.4),
    states.Thermal(0.6), states.Coherent(1 - 2j), states.SqueezedVacuum(1.0, 1.0),
])
def test_squeezing_minor_is_product_of_normal_ordered_variances(state):
    det = gbm.det_hermitian(gbm.build_gbm(state, gbm.squeezing()))
    _, vmin, _, vmax = gbm.quadrature_extremes(state)
    assert det == pytest.approx(0.25 * vmin * vmax, rel=1e-8, abs=1e-14)


def test_quadrature_extremes_phases():
    phi_min, vmin, phi_max, vmax = gbm.quadrature_extremes(states.SqueezedVacuum(0.5, 3.0, 0.4))
    assert phi_max == pytest.approx(0.4)
    assert phi_min == pytest.approx(0.4 + math.pi / 2)
    assert (vmin, vmax) == pytest.approx((-0.5, 2.0))
    # phase-symmetric: degenerate, phi_min pinned to 0
    assert gbm.quadrature_extremes(states.Thermal(0.2))[0] == 0.0


def test_det_examples():
    assert gbm.det_hermitian(np.eye(3)) == 1
    phi = 0.5 * np.exp(0.7j)
    assert gbm.det_hermitian([[1, phi], [np.conj(phi), 1]]) == pytest.approx(0.75)


def test_det_matches_numpy_on_random_hermitian(rng):
    for size in range(1, 7):
        a = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
        h = a + a.conj().T
        assert gbm.det_hermitian(h) == pytest.approx(np.linalg.det(h).real, rel=1e-10, abs=1e-12)


def test_non_hermitian_rejected():
    with pytest.raises(NumericalInconsistencyError):
        gbm.det_hermitian([[1, 0.5], [0.2, 1]])


class _BrokenSource:
    def cf(self, beta):
        return 1 + 0.3j * (beta != 0)

    def cf_derivative(self, order, beta):
        return 0j


def test_build_detects_non_hermitian_source():
    with pytest.raises(NumericalInconsistencyError):
        gbm.build_gbm(_BrokenSource(), gbm.bochner2(1.0))


def test_presets():
    assert gbm.preset("bochner2", 1.5) == gbm.GbmSpec((0, 0), (0, 0), (1.5, 0))
    assert gbm.preset("example3x3(0.5+1j)") == gbm.GbmSpec((0, 0, 1), (0, 1, 0), (0.5 + 1j, 0, 0.5 + 1j))
    assert gbm.preset("squeezing") == gbm.example3x3(0)
    assert gbm.preset("mom2") == gbm.GbmSpec((0, 1), (0, 0), (0, 0))
    spec = gbm.preset("gbm2", 2 - 1j)
    assert spec.betas[0] - spec.betas[1] == 2 - 1j
    with pytest.raises(ConfigurationError):
        gbm.preset("bochner7")


def test_bochner2_on_thermal(rng):
    nbar = 0.4
    for beta in rng.normal(size=10) + 1j * rng.normal(size=10):
        det = gbm.det_hermitian(gbm.build_gbm(states.Thermal(nbar), gbm.bochner2(beta)))
        assert det == pytest.approx(1 - math.exp(-2 * nbar * abs(beta) ** 2), abs=1e-14)
        assert det >= 0


def test_gbm2_detects_photon_added_mixture():
    det = gbm.det_hermitian(gbm.build_gbm(states.photon_added_mixture(), gbm.gbm2(5.8)))
    assert det < 0


@pytest.mark.parametrize("state", [states.photon_added_mixture(), SQUEEZED, states.Fock(2), *CLASSICAL])
def test_mom2_nonnegative(state):
    det = gbm.det_hermitian(gbm.build_gbm(state, gbm.mom2()))
    expected = states.moment(state, 1, 1).real - abs(states.moment(state, 0, 1)) ** 2
    assert det == pytest.approx(expected, abs=1e-12)
    assert det >= -1e-12


def test_mom2_zero_for_coherent():
    assert gbm.det_hermitian(gbm.build_gbm(states.Coherent(1.3 - 0.2j), gbm.mom2())) == pytest.approx(0, abs=1e-12)


def test_bochner_reduction_is_path_exact(rng):
    state = states.photon_added_mixture()
    for _ in range(10):
        spec = random_spec(rng, size=4)
        spec = gbm.GbmSpec((0,) * 4, (0,) * 4, spec.betas)
        mat = gbm.build_gbm(state, spec)
        for i in range(4):
            for j in range(4):
                assert mat[i, j] == states.cf(state, spec.betas[i] - spec.betas[j])


def test_mom_reduction(rng):
    for state in (states.photon_added_mixture(), SQUEEZED, states.Coherent(0.3 + 0.5j), states.Fock(3)):
        for _ in range(10):
            size = int(rng.integers(1, 5))
            spec = gbm.GbmSpec(rng.integers(0, 3, size), rng.integers(0, 3, size), [0] * size)
            mat = gbm.build_gbm(state, spec)
            for i in range(size):
                for j in range(size):
                    mom = states.moment(state, spec.n[i] + spec.m[j], spec.n[j] + spec.m[i])
                    expected = (-1) ** (spec.n[i] + spec.n[j]) * mom
                    assert abs(mat[i, j] - expected) <= 1e-8 * max(abs(expected), 1e-12) + 1e-15


@pytest.mark.parametrize("state", CLASSICAL)
def test_classical_states_positive(state, rng):
    for _ in range(50):
        assert gbm.det_hermitian(gbm.build_gbm(state, random_spec(rng))) >= -1e-8


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, size=int(rng.integers(2, 5)))
    state = states.photon_added_mixture() if seed % 2 else SQUEEZED
    perm = rng.permutation(spec.size)
    a = gbm.det_hermitian(gbm.build_gbm(state, spec))
    b = gbm.det_hermitian(gbm.build_gbm(state, spec.permuted(perm)))
    assert b == pytest.approx(a, rel=1e-10, abs=1e-10)


def test_spec_json_round_trip():
    spec = gbm.GbmSpec((0, 1, 2), (2, 0, 1), (0.5j, -1, 2 + 3j))
    assert gbm.GbmSpec.from_json(spec.to_json()) == spec
    assert json.loads(spec.to_json())["betas"][2] == [2.0, 3.0]
    with pytest.raises(ConfigurationError):
        gbm.GbmSpec((0, 1), (0,), (0, 0))
    with pytest.raises(ConfigurationError):
        gbm.GbmSpec.from_json('{"n": [0]}')


def test_lattice_row_major():
    pts = gbm.lattice(0, 1, 0.5, -1, 0, 1)
    assert pts.tolist() == [-1j, 0j, 0.5 - 1j, 0.5 + 0j, 1 - 1j, 1 + 0j]
    assert gbm.parse_grid("0:1:0.5,-1:0:1").tolist() == pts.tolist()
    with pytest.raises(ConfigurationError):
        gbm.parse_grid("0:1:0,0:1:1")
    with pytest.raises(ConfigurationError):
        gbm.parse_grid("0:1,0:1:1")


def test_grid_scan_classical_nonnegative():
    res = gbm.grid_scan(states.Thermal(0.2), gbm.bochner2, gbm.lattice(-2, 2, 0.25, -2, 2, 0.25))
    assert res.n_failed == 0
    assert np.all(res.det >= -1e-9)
    assert np.all(np.isnan(res.significance))


def test_grid_scan_mixture_radial():
    radii = np.linspace(0, 7, 141)
    res = gbm.grid_scan(states.photon_added_mixture(), gbm.gbm2, radii)
    k = int(np.argmin(res.det))
    assert res.det[k] < 0
    assert abs(radii[k] - 5.8) < 0.15


def test_grid_scan_single_point_matches_preset():
    res = gbm.grid_scan(SQUEEZED, gbm.example3x3, [0])
    assert res.det[0] == gbm.det_hermitian(gbm.build_gbm(SQUEEZED, gbm.squeezing()))


def test_grid_scan_records_failures():
    res = gbm.grid_scan(_BrokenSource(), gbm.bochner2, [0, 1.0])
    assert res.status[0] == "ok" and res.det[0] == 0
    assert "NumericalInconsistencyError" in res.status[1] and math.isnan(res.det[1])
    assert res.n_failed == 1


def test_significance_mask():
    res = gbm.ScanResult(np.zeros(3), np.array([1.0, 2, 3]), np.ones(3), np.array([-70.0, 4.9, 6.0]), ["ok"] * 3)
    masked = res.masked_significance()
    assert masked[0] == -70 and math.isnan(masked[1]) and masked[2] == 6
