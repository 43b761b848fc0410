import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsnoma.channel import (ArrayGeometry, ChannelError, ChannelRealization, PathLossModel,
                             cascade_vector, channel_from_dict, channel_to_dict, draw_channels,
                             effective_channel, load_channel, path_loss_db, sample_channel_f,
                             sample_channel_g, sample_path_loss_db, save_channel, ula_response,
                             upa_response)

from conftest import crandn

HALF_PI = math.pi / 2
angles = st.floats(-HALF_PI, HALF_PI)
NO_SHADOW = PathLossModel(shadowing=False)


# -- array responses -------------------------------------------------------------

def test_ula_broadside_is_uniform():
    np.testing.assert_allclose(ula_response(0.0, 4), np.full(4, 0.5))


def test_ula_endfire_two_elements():
    np.testing.assert_allclose(ula_response(HALF_PI, 2, math.pi), np.array([1, -1]) / math.sqrt(2),
                               atol=1e-15)


@given(angles, st.integers(1, 64))
def test_ula_unit_norm(theta, n):
    assert abs(np.linalg.norm(ula_response(theta, n)) - 1) < 1e-12


def test_upa_uniform_case():
    np.testing.assert_allclose(upa_response(0.0, HALF_PI, 2, 2), np.full(4, 0.5), atol=1e-15)


def test_upa_two_by_one():
    np.testing.assert_allclose(upa_response(HALF_PI, HALF_PI, 2, 1, math.pi),
                               np.array([1, -1]) / math.sqrt(2), atol=1e-15)


def test_upa_row_major_ordering():
    theta, phi, lx, lz = 0.3, 0.7, 3, 2
    a = upa_response(theta, phi, lx, lz, math.pi)
    for iz in range(lz):
        for ix in range(lx):
            want = np.exp(1j * math.pi * (ix * math.sin(theta) * math.sin(phi) + iz * math.cos(phi)))
            assert abs(a[iz * lx + ix] - want / math.sqrt(lx * lz)) < 1e-14


@given(angles, angles, st.integers(1, 8), st.integers(1, 8))
def test_upa_unit_norm(theta, phi, lx, lz):
    assert abs(np.linalg.norm(upa_response(theta, phi, lx, lz)) - 1) < 1e-12


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_responses_reject_non_finite(bad):
    with pytest.raises(ChannelError):
        ula_response(bad, 4)
    with pytest.raises(ChannelError):
        upa_response(0.1, bad, 2, 2)


# -- path loss -----------------------------------------------------------------

def test_path_loss_at_one_meter():
    assert sample_path_loss_db(1.0, "LoS", model=NO_SHADOW) == pytest.approx(61.4)
    assert sample_path_loss_db(1.0, "NLoS", model=NO_SHADOW) == pytest.approx(72.0)


@pytest.mark.parametrize("cls, beta2", [("LoS", 2.0), ("NLoS", 2.92)])
def test_path_loss_decade_step(cls, beta2):
    d = sample_path_loss_db(100.0, cls, model=NO_SHADOW) - sample_path_loss_db(10.0, cls, model=NO_SHADOW)
    assert d == pytest.approx(10 * beta2, abs=1e-12)


def test_path_loss_bs_irs_distance():
    d = math.dist((0, 0, 15), (20, 20, 15))
    assert sample_path_loss_db(d, "LoS", model=NO_SHADOW) == pytest.approx(90.43, abs=5e-3)


def test_path_loss_shadowing_statistics():
    rng = np.random.default_rng(0)
    draws = np.array([sample_path_loss_db(1.0, "NLoS", rng) for _ in range(20000)]) - 72.0
    assert abs(draws.mean()) < 0.2
    assert draws.std() == pytest.approx(8.7, rel=0.03)


def test_path_loss_rejects_bad_distance():
    with pytest.raises(ChannelError):
        sample_path_loss_db(0.0, "LoS")
    with pytest.raises(ChannelError):
        path_loss_db(-1.0, NO_SHADOW.los)


# -- channel draws ---------------------------------------------------------------

GEOM = ArrayGeometry(n_tx=8, l_x=4, l_z=4)


@pytest.mark.parametrize("paths", [1, 2, 3])
def test_f_rank_bounded_by_paths(paths):
    rng = np.random.default_rng(paths)
    for _ in range(20):
        F = sample_channel_f(GEOM, paths, 28.3, rng)
        assert F.shape == (16, 8)
        assert np.linalg.matrix_rank(F, tol=1e-9 * np.linalg.norm(F)) <= paths


def test_single_path_unit_gain_structure():
    rng = np.random.default_rng(3)
    F, paths = sample_channel_f(GEOM, 1, 28.3, rng, return_paths=True)
    p = paths[0]
    a = upa_response(p.aoa_azimuth, p.aoa_elevation, GEOM.l_x, GEOM.l_z, GEOM.phase_const)
    b = ula_response(p.aod_azimuth, GEOM.n_tx, GEOM.phase_const)
    want = math.sqrt(GEOM.n_tx * GEOM.l_irs) * p.gain * np.outer(a, b.conj())
    np.testing.assert_allclose(F, want, atol=1e-12 * np.abs(want).max())


def test_draws_are_deterministic():
    a = sample_channel_f(GEOM, 3, 28.3, np.random.default_rng(9))
    b = sample_channel_f(GEOM, 3, 28.3, np.random.default_rng(9))
    assert np.array_equal(a, b)
    a = sample_channel_g(GEOM, 3, 14.0, np.random.default_rng(9))
    b = sample_channel_g(GEOM, 3, 14.0, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_g_energy_grows_linearly_with_irs_size():
    means = []
    sizes = [(2, 2), (4, 2), (4, 4)]
    for lx, lz in sizes:
        rng = np.random.default_rng(11)
        geom = ArrayGeometry(n_tx=4, l_x=lx, l_z=lz)
        e = [np.linalg.norm(sample_channel_g(geom, 3, 14.0, rng, model=NO_SHADOW)) ** 2
             for _ in range(10000)]
        means.append(np.mean(e))
    ls = np.array([lx * lz for lx, lz in sizes], dtype=float)
    slope = means / ls
    assert np.all(np.abs(slope / slope.mean() - 1) < 0.05)


# -- effective channel and cascade -------------------------------------------------

def test_effective_channel_identity_phases():
    rng = np.random.default_rng(0)
    F = crandn(rng, 4, 3)
    g = np.zeros(4, complex)
    g[0] = 1
    np.testing.assert_allclose(effective_channel(g, np.zeros(4), F), F[0])


def test_common_phase_leaves_gain_unchanged():
    rng = np.random.default_rng(1)
    F, g, w = crandn(rng, 6, 3), crandn(rng, 6), crandn(rng, 3)
    th = rng.uniform(0, 2 * math.pi, 6)
    a = effective_channel(g, th, F) @ w
    b = effective_channel(g, th + 1.234, F) @ w
    assert abs(abs(a) - abs(b)) < 1e-12
    assert abs(b - a * np.exp(1.234j)) < 1e-12


def test_cascade_identity_random():
    rng = np.random.default_rng(2)
    for _ in range(200):
        L, N = rng.integers(1, 20), rng.integers(1, 9)
        F, g, w = crandn(rng, L, N), crandn(rng, L), crandn(rng, N)
        th = rng.uniform(0, 2 * math.pi, L)
        lhs = cascade_vector(g, F, w) @ np.exp(1j * th)
        rhs = effective_channel(g, th, F) @ w
        assert abs(lhs - rhs) <= 1e-10 * abs(rhs)


def test_cascade_edge_cases():
    rng = np.random.default_rng(3)
    F, g = crandn(rng, 5, 2), crandn(rng, 5)
    assert np.all(cascade_vector(g, F, np.zeros(2)) == 0)
    F1, g1, w = crandn(rng, 1, 3), crandn(rng, 1), crandn(rng, 3)
    np.testing.assert_allclose(cascade_vector(g1, F1, w), g1.conj() * (F1 @ w))


def test_dimension_mismatch_raises():
    rng = np.random.default_rng(4)
    with pytest.raises(ChannelError):
        effective_channel(crandn(rng, 4), np.zeros(3), crandn(rng, 4, 2))
    with pytest.raises(ChannelError):
        cascade_vector(crandn(rng, 4), crandn(rng, 4, 2), crandn(rng, 3))


# -- full realizations and serialization --------------------------------------------

def _users(n=4):
    return [np.array([[30.0 + i, 30.0, 0.0], [28.0, 31.0 - i, 0.0]]) for i in range(n // 2)]


def test_draw_channels_shapes_and_finiteness():
    ch = draw_channels(GEOM, (0, 0, 15), (20, 20, 15), _users(), np.random.default_rng(0), seed=5)
    assert ch.f.shape == (16, 8)
    assert [gm.shape for gm in ch.g] == [(2, 16), (2, 16)]
    assert np.all(np.isfinite(ch.f))


def test_realization_rejects_bad_shapes():
    with pytest.raises(ChannelError):
        ChannelRealization(np.zeros((4, 2), complex), [np.zeros((2, 3), complex)])


def test_json_round_trip(tmp_path):
    ch = draw_channels(GEOM, (0, 0, 15), (20, 20, 15), _users(), np.random.default_rng(1), seed=7)
    back = channel_from_dict(channel_to_dict(ch))
    assert np.array_equal(back.f, ch.f) and back.seed == 7
    assert all(np.array_equal(a, b) for a, b in zip(back.g, ch.g))
    path = tmp_path / "ch.json"
    save_channel(ch, path)
    again = load_channel(path)
    assert np.array_equal(again.f, ch.f)
