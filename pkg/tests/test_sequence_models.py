import math

import numpy as np
import pytest

from htbnp import DomainError
from htbnp.sequence_models import (TruthSpec, achieved_snr, dj94_signal, make_truth, simulate, snr_rescale,
                                   volterra_multipliers)
from htbnp.wavelet import dwt_inverse


def test_dj94_closed_form_points():
    # t = (1, 2)/2 = 0.5, 1.0
    np.testing.assert_allclose(dj94_signal("HeaviSine", 2), [-2.0, 0.0], atol=1e-12)
    # all eleven jumps are passed at t = 1 and the heights sum to zero
    assert dj94_signal("Blocks", 2)[-1] == pytest.approx(0.0, abs=1e-12)
    assert dj94_signal("Doppler", 2)[-1] == 0.0


def test_dj94_unknown_signal():
    with pytest.raises(DomainError):
        dj94_signal("Ramp")


def test_snr_rescale_hits_target():
    for name in ("Blocks", "Bumps", "HeaviSine", "Doppler"):
        x = snr_rescale(dj94_signal(name), 1.0, 7.0)
        assert achieved_snr(x) == pytest.approx(7.0, rel=1e-12)


def test_volterra_multipliers():
    k = volterra_multipliers(3)
    np.testing.assert_allclose(k, [2 / math.pi, 2 / (3 * math.pi), 2 / (5 * math.pi)])
    np.testing.assert_allclose(volterra_multipliers(3, printed_formula=True), 1 / k)
    with pytest.raises(DomainError):
        volterra_multipliers(0)


def test_sobolev_truth():
    f = make_truth(TruthSpec("SobolevSin"), 4).values
    k = np.arange(1, 5)
    np.testing.assert_allclose(f, k**-1.5 * np.sin(k))


def test_density_truth_coefficients():
    f = make_truth(TruthSpec("DensityLogTruth"), 3).values
    assert f.size == 16
    assert f[0] == 0.0  # the constant is absorbed by the normalization
    assert f[1] == pytest.approx(4.0)  # level 0, k = 0
    assert f[3] == pytest.approx(4 * math.cos(1) ** 3 * 2**-2.5)  # level 1, k = 1


def test_dj94_truth_is_rescaled_signal():
    truth = make_truth(TruthSpec("DJ94", "Bumps"), 11)
    x = dwt_inverse(truth, "symmlet8")
    assert achieved_snr(x) == pytest.approx(7.0, rel=1e-10)


def test_simulate_noise_level_and_seed():
    truth = make_truth(TruthSpec("SobolevSin"), 20_000)
    obs = simulate(truth, 100.0, rng_seed=5)
    resid = obs.x - truth.values
    assert np.var(resid) * 100 == pytest.approx(1.0, abs=0.03)
    np.testing.assert_array_equal(simulate(truth, 100.0, rng_seed=5).x, obs.x)


def test_simulate_inverse_uses_multipliers():
    truth = make_truth(TruthSpec("SobolevSin"), 10)
    kappa = volterra_multipliers(10)
    obs = simulate(truth, 1e16, kappa, rng_seed=0)
    np.testing.assert_allclose(obs.x, kappa * truth.values, atol=1e-6)
    with pytest.raises(DomainError):
        simulate(truth, 1.0, kappa[:5])
    with pytest.raises(DomainError):
        simulate(truth, 0.0)
