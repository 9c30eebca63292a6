import dataclasses
import math

import numpy as np
import pytest

from fdsic.signals import ComplexSequence, gen_proper_gaussian
from fdsic.transceiver import (ChannelSet, NoiseBudget, compute_noise_budget,
                               compute_power_budget, load_profile,
                               render_observation, synthesize_channels)
from fdsic.units import dbm_to_mw, mw_to_dbm

from conftest import M, N, SEED


def test_builtin_profiles(type1, type2):
    for prof in (type1, type2):
        assert prof.p_sen_dbm == -89.0
        assert prof.snr_req_db == 15.0
        assert prof.irr_db == 25.0
        assert prof.adc_bits == 12
    assert type1.rf_separation_db == 40.0 and type1.rf_attenuation_db == 30.0
    assert type2.rf_separation_db == 30.0 and type2.rf_attenuation_db == 20.0


def test_profile_file_errors(tmp_path):
    bad = tmp_path / "bad.profile"
    bad.write_text("nonsense_key = 3 dB\n")
    with pytest.raises(ValueError):
        load_profile(bad)
    with pytest.raises(FileNotFoundError):
        load_profile(tmp_path / "missing.profile")


def test_profile_tx_power_range(type2):
    with pytest.raises(ValueError):
        type2.with_tx_power(30.0)


def test_sigma_q2_value(type2):
    budget = compute_noise_budget(type2, type2.natural_sigma_x2, type2.f_rfe_norm2)
    # beta=12, PAPR=10 dB, p_adc=7 dB: SQNR exponent 6.02*12+4.76-10 = 67 dB
    assert 6.02 * 12 + 4.76 - 10 == pytest.approx(67.0)
    assert budget.sigma_q2 == pytest.approx(10 ** 0.7 / 10 ** 6.7, rel=1e-12)
    assert budget.sigma_q2 == pytest.approx(1e-6, rel=1e-9)


def test_sigma_v2_vanishes_with_snr_req(type2):
    strict = dataclasses.replace(type2, snr_req_db=300.0)
    budget = compute_noise_budget(strict, strict.natural_sigma_x2, strict.f_rfe_norm2)
    assert budget.sigma_v2 < 1e-30


def test_soi_to_thermal_is_snr_req(type2):
    budget = compute_noise_budget(type2, type2.natural_sigma_x2, type2.f_rfe_norm2)
    assert budget.p_x_soi / budget.sigma_v2 == pytest.approx(type2.snr_req, rel=1e-12)
    assert budget.p_x_soi == pytest.approx(
        type2.p_sen_mw * type2.k_lna * budget.k_bb * type2.k_riq, rel=1e-12)


def test_sigma_q2_decreasing_in_bits(type2):
    values = []
    for bits in (8, 10, 12, 14):
        prof = dataclasses.replace(type2, adc_bits=bits)
        values.append(compute_noise_budget(prof, prof.natural_sigma_x2,
                                           prof.f_rfe_norm2).sigma_q2)
    assert all(a > b for a, b in zip(values, values[1:]))


def test_channel_image_power_ratio(type2):
    ch = synthesize_channels(type2, M, N, seed=SEED)
    ratio = ch.norm2_g / ch.norm2_h
    assert ratio == pytest.approx(10 ** (-2.5), rel=0.01)
    ratio_imd = ch.norm2_g_imd / ch.norm2_h_imd
    assert ratio_imd == pytest.approx(10 ** (-2.5), rel=0.01)


def test_channel_infinite_irr(type2):
    prof = dataclasses.replace(type2, irr_db=math.inf)
    ch = synthesize_channels(prof, M, N, seed=3)
    assert not np.any(ch.g) and not np.any(ch.g_imd)


def test_channel_determinism(type2):
    a = synthesize_channels(type2, M, N, seed=3)
    b = synthesize_channels(type2, M, N, seed=3)
    for name in ("h", "g", "h_imd", "g_imd"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_channel_bad_lengths(type2):
    with pytest.raises(ValueError):
        synthesize_channels(type2, 4, 4, seed=0)
    with pytest.raises(ValueError):
        ChannelSet(h=np.ones(4), g=np.ones(4), h_imd=np.ones(4), g_imd=np.ones(4))


def test_sigma_x2_override_preserves_component_powers(type2):
    n = 50_000
    base = synthesize_channels(type2, M, N, seed=SEED)
    scaled = synthesize_channels(type2, M, N, seed=SEED, sigma_x2=0.5)
    s_nat = type2.natural_sigma_x2
    assert base.norm2_h * s_nat == pytest.approx(scaled.norm2_h * 0.5, rel=1e-9)
    assert (6 * type2.k_tiq ** 3 * s_nat ** 3 * base.norm2_h_imd
            == pytest.approx(6 * type2.k_tiq ** 3 * 0.5 ** 3 * scaled.norm2_h_imd,
                             rel=1e-9))
    del n


def _zero_budget():
    return NoiseBudget(sigma_v2=0.0, sigma_q2=0.0, k_bb=1.0, p_x_soi=0.0, alpha1=-1.0)


def test_render_zero_channels(type2):
    ch = ChannelSet(h=np.array([1e-300, 0, 0, 0, 0]), g=np.zeros(5),
                    h_imd=np.zeros(4), g_imd=np.zeros(4))
    x = gen_proper_gaussian(500, 1.0, seed=1)
    obs = render_observation(x, ch, _zero_budget(), type2, seed=2)
    assert np.allclose(obs.d.samples, 0.0, atol=1e-290)


def test_render_identity_channel(type2):
    ch = ChannelSet(h=np.array([1.0, 0, 0, 0, 0]), g=np.zeros(5),
                    h_imd=np.zeros(4), g_imd=np.zeros(4))
    x = gen_proper_gaussian(500, 1.0, seed=1)
    obs = render_observation(x, ch, _zero_budget(), type2, seed=2)
    assert np.array_equal(obs.d.samples, x.samples)


def test_render_too_short(type2):
    ch = synthesize_channels(type2, M, N, seed=SEED)
    budget = compute_noise_budget(type2, type2.natural_sigma_x2, type2.f_rfe_norm2)
    x = ComplexSequence(np.ones(M, dtype=complex), 1.0)
    with pytest.raises(ValueError):
        render_observation(x, ch, budget, type2, seed=0)


def test_component_sum_identity(type2):
    ch = synthesize_channels(type2, M, N, seed=SEED)
    budget = compute_noise_budget(type2, type2.natural_sigma_x2, type2.f_rfe_norm2)
    x = gen_proper_gaussian(10_000, type2.natural_sigma_x2, seed=5)
    obs = render_observation(x, ch, budget, type2, seed=6, include_soi=True)
    total = sum(obs.components.values())
    assert np.max(np.abs(obs.d.samples - total)) == 0.0


def test_imd_moment_law(type2):
    ch = synthesize_channels(type2, M, N, seed=SEED)
    budget = compute_noise_budget(type2, type2.natural_sigma_x2, type2.f_rfe_norm2)
    x = gen_proper_gaussian(100_000, type2.natural_sigma_x2, seed=7)
    obs = render_observation(x, ch, budget, type2, seed=8)
    measured = np.mean(np.abs(obs.components["imd_si"]) ** 2)
    expected = (6 * type2.k_tiq ** 3 * type2.natural_sigma_x2 ** 3 * ch.norm2_h_imd)
    assert 0.95 <= measured / expected <= 1.05


GRID = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0)


def test_power_budget_type1_dominance(type1):
    rows = compute_power_budget(type1, GRID)
    for row in rows:
        interferers = sorted(
            [row.linear_si_dbm, row.image_si_dbm, row.imd_si_dbm,
             row.image_imd_si_dbm, row.thermal_dbm, row.quantization_dbm],
            reverse=True)
        assert {row.linear_si_dbm, row.image_si_dbm} == set(interferers[:2])


def test_power_budget_type2_crossover(type2):
    rows = {r.tx_power_dbm: r for r in compute_power_budget(type2, GRID)}
    for tx, row in rows.items():
        if tx < 15.0:
            assert row.thermal_dbm > row.quantization_dbm
        if tx > 20.0:
            assert row.thermal_dbm < row.quantization_dbm


def test_power_budget_imd_slope(type2):
    # At the canceller input the receiver VGA gain k_bb falls 1 dB per dB of
    # transmit power in the SI-limited regime, so the cubic |x|^2 x law shows
    # up as exactly 3 dB/dB once the shared gain is divided out (thermal
    # noise tracks k_bb, making imd - thermal a gain-free probe).
    rows = compute_power_budget(type2, GRID)
    referred = [r.imd_si_dbm - r.thermal_dbm for r in rows]
    slopes = np.diff(referred) / np.diff([r.tx_power_dbm for r in rows])
    assert np.allclose(slopes, 3.0, atol=0.02)
    gap_vs_si = [r.imd_si_dbm - r.linear_si_dbm for r in rows]
    slopes_gap = np.diff(gap_vs_si) / 5.0
    assert np.allclose(slopes_gap, 2.0, atol=0.02)


def test_power_budget_zero_channels(type2):
    prof = dataclasses.replace(type2, irr_db=math.inf)
    rows = compute_power_budget(prof, [0.0])
    assert rows[0].image_si_dbm == -math.inf
    assert rows[0].image_imd_si_dbm == -math.inf


def test_power_budget_rejects_empty(type2):
    with pytest.raises(ValueError):
        compute_power_budget(type2, [])


def test_mw_dbm_roundtrip():
    assert mw_to_dbm(dbm_to_mw(13.0)) == pytest.approx(13.0)
