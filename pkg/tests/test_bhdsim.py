import math

import numpy as np
import pytest
import scipy.stats
from scipy.integrate import trapezoid

from gbmcheck import bhdsim, estimator, states
from gbmcheck.errors import ConfigurationError, InsufficientDataError, ParseError, UnsupportedStateError
from gbmcheck.estimator import QuadratureDataset


def phase_binned_variance(data, phi0, width=0.05):
    d = (data.phi - phi0 + math.pi / 2) % math.pi - math.pi / 2
    sel = np.abs(d) < width
    return data.x[sel].var(), int(sel.sum())


def test_vacuum_variance():
    data = bhdsim.generate(bhdsim.SimConfig(states.Thermal(0.0), samples=10**5, seed=1))
    assert data.x.var() == pytest.approx(1.0, abs=5 * math.sqrt(2 / 10**5))
    assert abs(data.x.mean()) < 5 / math.sqrt(10**5)


@pytest.mark.parametrize("eta", [1.0, 0.77])
def test_squeezed_variances(eta):
    state = states.SqueezedVacuum(0.386, 4.08, 0.0)
    data = bhdsim.generate(bhdsim.SimConfig(state, efficiency=eta, samples=4 * 10**5, seed=2))
    for phi0, v in [(0.0, 4.08), (math.pi / 2, 0.386)]:
        got, n = phase_binned_variance(data, phi0, width=0.02)
        expected = eta * v + 1 - eta
        assert got == pytest.approx(expected, rel=6 * math.sqrt(2 / n))


def test_coherent_mean_follows_phase():
    alpha = 0.7 + 0.2j
    data = bhdsim.generate(bhdsim.SimConfig(states.Coherent(alpha), samples=2 * 10**5, seed=3, phase_mode="uniform"))
    resid = data.x - 2 * np.real(alpha * np.exp(1j * data.phi))
    assert abs(resid.mean()) < 5 / math.sqrt(data.M)
    assert resid.var() == pytest.approx(1, abs=0.02)


def test_deterministic_in_seed():
    cfg = bhdsim.SimConfig(states.photon_added_mixture(), samples=70_000, seed=42)
    assert bhdsim.generate(cfg) == bhdsim.generate(cfg)
    other = bhdsim.generate(bhdsim.SimConfig(states.photon_added_mixture(), samples=70_000, seed=43))
    assert not np.array_equal(bhdsim.generate(cfg).x, other.x)


def test_blocks_independent_of_length():
    # record block b depends only on (seed, b)
    long = bhdsim.generate(bhdsim.SimConfig(states.Thermal(0.2), samples=bhdsim.BLOCK + 10, seed=4))
    short = bhdsim.generate(bhdsim.SimConfig(states.Thermal(0.2), samples=bhdsim.BLOCK, seed=4))
    assert np.array_equal(long.x[: bhdsim.BLOCK], short.x)


def test_sweep_phases():
    data = bhdsim.generate(bhdsim.SimConfig(states.Thermal(0.0), samples=4096, period=4096))
    assert np.all((data.phi >= 0) & (data.phi < math.pi))
    assert data.phi[0] == 0 and data.phi[1024] == pytest.approx(math.pi / 2)
    assert estimator.phase_uniformity(data).passed


def test_config_validation():
    thermal = states.Thermal(0.1)
    for bad in [dict(efficiency=0.0), dict(efficiency=1.2), dict(samples=0), dict(phase_mode="random"),
                dict(period=1), dict(seed=-1)]:
        with pytest.raises(ConfigurationError):
            bhdsim.SimConfig(thermal, **bad)
    with pytest.raises(ConfigurationError):
        bhdsim.SimConfig.from_dict({"state": "vacuum", "colour": 1})
    cfg = bhdsim.SimConfig(states.reference_squeezed(), efficiency=0.8, samples=12, seed=3)
    assert bhdsim.SimConfig.from_dict(cfg.to_dict()) == cfg


def test_unsupported_state():
    class Cat(states.StateModel):
        kind = "cat"

        def terms(self):
            return ()

    with pytest.raises(UnsupportedStateError):
        bhdsim.generate(bhdsim.SimConfig(Cat(), samples=10))


@pytest.mark.parametrize("state", [states.Fock(1), states.Fock(3), states.PhotonAddedThermal(2, 0.3), states.photon_added_mixture()])
def test_quadrature_density_normalized(state):
    grid = np.linspace(-15, 15, 6001)
    dens = bhdsim.quadrature_density(state, grid)
    assert trapezoid(dens, grid) == pytest.approx(1, abs=1e-10)
    assert trapezoid(grid**2 * dens, grid) == pytest.approx(1 + 2 * states.mean_photon_number(state), rel=1e-8)


def test_fock_inverse_cdf_accuracy():
    grid, cdf = bhdsim._inverse_cdf_table(states.Fock(2))
    fine = np.linspace(grid[0], grid[-1], 200_001)
    dens = bhdsim.quadrature_density(states.Fock(2), fine)
    exact = np.concatenate(([0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))))
    assert np.max(np.abs(np.interp(fine, grid, cdf) - exact)) < 1e-3


@pytest.mark.parametrize("state", [states.Fock(2), states.PhotonAddedThermal(1, 0.2), states.reference_squeezed(),
                                   states.Coherent(0.5 - 0.8j), states.photon_added_mixture()])
def test_moment_fidelity(state):
    data = bhdsim.generate(bhdsim.SimConfig(state, samples=3 * 10**5, seed=7))
    for total in range(1, 5):
        for k in range(total + 1):
            est = estimator.sample_moment(data, k, total - k)
            assert est.within(states.moment(state, k, total - k), k=4.5), (k, total - k)


def test_loss_matches_lossy_gaussian():
    # a 3-photon Fock state through eta = 0.6 vs direct convolution by vacuum noise
    eta = 0.6
    lossy = bhdsim.generate(bhdsim.SimConfig(states.Fock(3), efficiency=eta, samples=50_000, seed=8)).x
    clean = bhdsim.generate(bhdsim.SimConfig(states.Fock(3), samples=50_000, seed=80)).x
    noise = np.random.default_rng(81).standard_normal(50_000)
    assert scipy.stats.ks_2samp(lossy, math.sqrt(eta) * clean + math.sqrt(1 - eta) * noise).pvalue > 1e-3


def test_fock_distribution_ks():
    grid, cdf = bhdsim._inverse_cdf_table(states.Fock(1))
    x = bhdsim.generate(bhdsim.SimConfig(states.Fock(1), samples=20_000, seed=10)).x
    assert scipy.stats.kstest(x, lambda v: np.interp(v, grid, cdf)).pvalue > 1e-3


def test_squeezed_source_interpretations():
    det = bhdsim.squeezed_source(-4.13, 6.11, 1.0)
    assert det == states.reference_squeezed()
    assert bhdsim.squeezed_source(-3, 3, 0.5, db_refers_to="source") == states.SqueezedVacuum.from_db(-3, 3)
    src = bhdsim.squeezed_source(-3, 3, 0.8)
    assert 0.8 * src.vmin + 0.2 == pytest.approx(10**-0.3)
    with pytest.raises(ConfigurationError):
        bhdsim.squeezed_source(-10, 10, 0.5)
    with pytest.raises(ConfigurationError):
        bhdsim.squeezed_source(-3, 3, 0.8, db_refers_to="both")


# -- file format ------------------------------------------------------------

@pytest.mark.parametrize("samples", [3, 100_000])
def test_round_trip_bit_exact(tmp_path, samples):
    data = bhdsim.generate(bhdsim.SimConfig(states.reference_squeezed(), samples=samples, seed=12))
    path = tmp_path / "d.csv"
    bhdsim.write_dataset(data, path)
    assert bhdsim.read_dataset(path) == data
    if samples == 3:
        assert path.read_text().splitlines()[0] == "x,phi"
        assert len(path.read_text().splitlines()) == 4


def test_header_only_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("x,phi\n")
    with pytest.raises(InsufficientDataError):
        bhdsim.read_dataset(path)


@pytest.mark.parametrize("bad,line", [("0.1,0.2\n0.3\n", 3), ("0.1,0.2\n0.3,0.4\nfoo,1\n", 4),
                                      ("0.1,nan\n", 2), ("0.1,0.2,0.3\n", 2)])
def test_malformed_line_reported(tmp_path, bad, line):
    path = tmp_path / "bad.csv"
    path.write_text("x,phi\n" + bad)
    with pytest.raises(ParseError) as info:
        bhdsim.read_dataset(path)
    assert info.value.line == line


def test_wrong_header(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("q,theta\n0,0\n")
    with pytest.raises(ParseError):
        bhdsim.read_dataset(path)


def test_out_of_range_phases_folded(tmp_path, caplog):
    path = tmp_path / "f.csv"
    path.write_text("x,phi\n1.5,4.0\n-0.5,0.25\n")
    data = bhdsim.read_dataset(path)
    assert data.x.tolist() == [-1.5, -0.5]
    assert data.phi[0] == pytest.approx(4.0 - math.pi)
    assert "folded" in caplog.text


def test_dataset_equality():
    a = QuadratureDataset([1.0, 2.0], [0.0, 1.0])
    assert a == QuadratureDataset([1.0, 2.0], [0.0, 1.0])
    assert a != QuadratureDataset([1.0, 2.0], [0.0, 1.1])
