import numpy as np
import pytest

from capa import (
    beamforming_gain_capa,
    beamforming_gain_spda,
    mmse,
    mrt,
    polyblock_maximize,
    random_scenario,
    sinr,
    spda_array,
    spda_channels,
    spda_gram,
    spda_optimal,
    sum_rate,
    zf,
)
from capa.channel import los_channel_response
from capa.spda import precoder, table_one_directions

from conftest import gram, on_axis


@pytest.fixture(scope="module")
def setup():
    scenario = random_scenario(7, 4)
    H = spda_channels(spda_array(scenario.aperture, scenario.wavelength), scenario)
    return scenario, H


def test_single_antenna_gram():
    scenario = on_axis()
    array = spda_array(scenario.aperture, scenario.wavelength)
    center = array.centers[:1]
    h = los_channel_response(center[0], scenario.users[0], scenario.tx_polarization, scenario.wavelength)
    H = np.sqrt(array.effective_area) * np.array([[h]])
    G = spda_gram(H)
    assert G.shape == (1, 1)
    assert G[0, 0].real == pytest.approx(array.effective_area * abs(h) ** 2, rel=1e-12)


def test_gram_hermitian_psd(setup):
    _, H = setup
    G = spda_gram(H)
    assert np.array_equal(G, G.conj().T)
    assert np.linalg.eigvalsh(G).min() >= -1e-10 * np.abs(G).max()


@pytest.mark.parametrize("kind", ["mrt", "zf", "mmse"])
def test_table_one_equivalence(setup, kind):
    scenario, H = setup
    P, s2 = scenario.power_budget, scenario.noise_power
    G = spda_gram(H)
    p = np.array([0.1, 0.2, 0.3, 0.4]) * P
    shared = {"mrt": lambda: mrt(G, p), "zf": lambda: zf(G, p), "mmse": lambda: mmse(G, P, s2, p)}[kind]()
    W_shared = precoder(H, shared)
    # the same design written directly in the antenna domain
    W = table_one_directions(kind, H, s2, P)
    W = W / np.linalg.norm(W, axis=0) * np.sqrt(p)
    received = H.conj().T @ W
    assert np.allclose(H.conj().T @ W_shared, received, rtol=0, atol=1e-12 * np.abs(received).max())
    assert np.allclose(np.sum(np.abs(W_shared) ** 2, axis=0), p, rtol=1e-12)


def test_dense_sampling_approaches_capa():
    scenario = random_scenario(3, 3)
    Q, _, _ = gram(scenario)
    d = scenario.wavelength / 8
    aperture = scenario.aperture
    count = int(np.ceil(aperture.lx / d - 1e-9)) * int(np.ceil(aperture.ly / d - 1e-9))
    array = spda_array(aperture, scenario.wavelength, spacing=d, effective_area=aperture.area / count)
    G = spda_gram(spda_channels(array, scenario))
    assert np.max(np.abs(G - Q) / np.abs(Q)) < 0.05


def test_injected_gram_reproduces_capa():
    scenario = random_scenario(5, 2)
    Q, _, _ = gram(scenario)
    # H with H^H H == Q exactly: the upper Cholesky factor
    H = np.linalg.cholesky(Q).conj().T
    G = spda_gram(H)
    capa = polyblock_maximize(G, scenario.noise_power, scenario.power_budget)
    result, W = spda_optimal(H, scenario.noise_power, scenario.power_budget)
    assert result.utility == capa.utility
    assert np.array_equal(result.theta, capa.theta)
    assert np.array_equal(W, H @ capa.coefficients)


def test_single_user_optimal_rate():
    scenario = on_axis()
    H = spda_channels(spda_array(scenario.aperture, scenario.wavelength), scenario)
    result, W = spda_optimal(H, scenario.noise_power, scenario.power_budget)
    expected = np.log2(1 + scenario.power_budget * np.sum(np.abs(H) ** 2) / scenario.noise_power)
    assert result.utility == pytest.approx(expected, abs=1e-6)
    assert np.sum(np.abs(W) ** 2) == pytest.approx(scenario.power_budget, rel=1e-6)


def test_capa_optimal_beats_spda_optimal():
    scenario = random_scenario(11, 2)
    Q, _, _ = gram(scenario)
    H = spda_channels(spda_array(scenario.aperture, scenario.wavelength), scenario)
    capa = polyblock_maximize(Q, scenario.noise_power, scenario.power_budget)
    spda, W = spda_optimal(H, scenario.noise_power, scenario.power_budget)
    assert capa.utility > spda.upper
    assert sum_rate(sinr(spda_gram(H), spda.coefficients, scenario.noise_power)) == pytest.approx(spda.utility, abs=1e-8)


def test_beamforming_gain_dominance(setup):
    scenario, H = setup
    Q, _, _ = gram(scenario)
    assert beamforming_gain_capa(Q) > beamforming_gain_spda(H)
    assert beamforming_gain_spda(H) == pytest.approx(beamforming_gain_capa(spda_gram(H)), rel=1e-12)


def test_unknown_table_design(setup):
    scenario, H = setup
    with pytest.raises(ValueError):
        table_one_directions("svd", H, scenario.noise_power, scenario.power_budget)
