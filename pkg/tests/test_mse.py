from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdmimo.channel import (ArrayGeometry, LinkChannel, PathParams, ScenarioConfig, complex_gaussian,
                            draw_scenario, single_link_scenario)
from fdmimo.esprit import estimate_doa, match_paths
from fdmimo.mse import (COMPONENTS, DegenerateModeError, FirstOrderModel, InterferenceStats, Interferer,
                        LowRankCovariance, PriorSamples, SingularJacobianError, TargetPath,
                        angle_mse_from_frequency_mse, fba_covariances, interference_terms, mse_breakdown,
                        mse_first_order, mse_noise, mse_pilot, noise_covariance_components)
from fdmimo.numerics import DomainError
from fdmimo.pilots import build_pilot_book, despread, despread_terms

ANGLES = st.tuples(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))


def test_mse_noise_examples():
    geo = ArrayGeometry(8, 8, nt=8)
    assert mse_noise(1.0, 1.0, geo, 0.0) == 0.0
    assert mse_noise(1.0, 1.0, geo, 1.0, convention="printed") == pytest.approx(1 / 6272)
    assert mse_noise(1.0, 1.0, geo, 1.0) == pytest.approx(1 / 3136)
    wide = ArrayGeometry(16, 8, nt=8)
    assert mse_noise(1.0, 1.0, wide, 1.0, "v") == pytest.approx(mse_noise(1.0, 1.0, geo, 1.0, "v") / 2)
    assert mse_noise(0.0, 1.0, geo, 1.0) == np.inf
    # axis u swaps the roles of m1 and m2
    assert mse_noise(1.0, 1.0, ArrayGeometry(4, 6, nt=2), 1.0, "u") == pytest.approx(1 / (2 * 9 * 6))


def test_fba_covariance_examples(rng):
    big_r, big_c = fba_covariances(np.eye(3))
    np.testing.assert_allclose(big_r, np.eye(6))
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    r = a @ a.conj().T
    big_r, big_c = fba_covariances(r)
    np.testing.assert_allclose(big_r, big_r.conj().T)
    assert not big_c[:4, :4].any() and not big_c[4:, 4:].any()


def _scenario(cells, users, seed=0, m=4, nt=2, paths=2):
    cfg = ScenarioConfig(cells=cells, users_per_cell=users, m1=m, m2=m, nt=nt, num_paths=paths)
    return draw_scenario(cfg, np.random.default_rng(seed))


def test_covariance_zero_components():
    sc = _scenario(1, 3)
    r = noise_covariance_components(sc, build_pilot_book(3, 2, 8, 0.2), (0, 0), 0, 1.0)
    assert not r["pilot"].any() and not r["inter"].any() and r["intra"].any()
    sc = _scenario(7, 2)
    r = noise_covariance_components(sc, build_pilot_book(2, 2, 8, 0.0), (0, 0), 0, 1.0)
    assert not r["intra"].any() and not r["inter"].any() and r["pilot"].any()
    np.testing.assert_allclose(r["noise"], np.eye(32))


def test_covariance_matches_simulation():
    # oracle: despread terms of single-path scenarios, combined with random phases
    full = _scenario(7, 2, seed=3, m=3, nt=2)
    cut = {name: getattr(full, name)[:, :2, :2] for name in ("large_scale", "gains", "elevation", "azimuth", "dod")}
    sc = replace(full, user_positions=full.user_positions[:, :2], bs_positions=full.bs_positions[:2], **cut)
    book = build_pilot_book(2, 2, 8, 0.3)
    sigma2, k, target = 0.5, 2, (0, 0)
    basis = []
    for j in range(2):
        for g in range(2):
            for l in range(sc.num_paths):
                if (j, g) == target:
                    continue
                mask = np.zeros_like(sc.gains)
                mask[j, g, :, l] = sc.gains[j, g, :, l]
                terms = despread_terms(replace(sc, gains=mask), book, target, k)
                basis.append(sum(v for name, v in terms.items() if name != "target").reshape(-1, order="F"))
    basis = np.array(basis).T
    rng = np.random.default_rng(1)
    n = 10_000
    phases = np.exp(2j * np.pi * rng.random((basis.shape[1], n)))
    w = complex_gaussian(rng, (n, sc.geometry.nr, book.q), sigma2)
    noise = np.stack([despread(x, book, target).reshape(-1, order="F") for x in w], axis=1)
    samples = basis @ phases + noise
    emp = samples @ samples.conj().T / n
    model = sum(noise_covariance_components(sc, book, target, k, sigma2).values())
    assert np.linalg.norm(emp - model) / np.linalg.norm(model) <= 0.05


def test_low_rank_matches_dense(rng):
    sc = _scenario(7, 2, seed=5)
    book = build_pilot_book(2, 2, 8, 0.1)
    dense = noise_covariance_components(sc, book, (1, 3), 0, 0.3)
    low = noise_covariance_components(sc, book, (1, 3), 0, 0.3, dense=False)
    for name in COMPONENTS:
        np.testing.assert_allclose(low[name].dense(), dense[name], atol=1e-12)
    link = sc.link(1, 3, 3)
    r_fba, c_fba = fba_covariances(dense["pilot"])
    a = mse_first_order(link, sc.geometry, 0, r_fba, c_fba, path=1, axis="u")
    b = mse_first_order(link, sc.geometry, 0, low["pilot"], path=1, axis="u")
    assert a == pytest.approx(b, rel=1e-9)


def _link(paths, lam=1.0):
    return LinkChannel(tuple(PathParams(l, *p) for l, p in enumerate(paths)), lam)


def test_first_order_zero_covariance():
    geo = ArrayGeometry(4, 4, nt=2)
    link = _link([(1.0, 1.0, 0.5, 1.0), (0.5j, 2.0, -0.4, 2.0)])
    n = 2 * geo.nr * geo.nt
    assert mse_first_order(link, geo, 0, np.zeros((n, n)), np.zeros((n, n)), path=0) == 0.0


def test_degenerate_mode_error():
    geo = ArrayGeometry(4, 4, nt=2)
    link = _link([(1.0, 1.0, 0.5, 1.0), (1.0, 1.0, 0.5, 2.0)])
    with pytest.raises(DegenerateModeError):
        FirstOrderModel.from_link(link, geo)


def test_first_order_noise_matches_closed_form():
    geo = ArrayGeometry(16, 16, nt=8)
    link = _link([(0.9 - 0.2j, 1.1, 0.7, 1.3)], lam=0.6)
    noise = LowRankCovariance(np.zeros((geo.nr * geo.nt, 0), complex), np.zeros(0), 1.0)
    for axis in ("u", "v"):
        fo = mse_first_order(link, geo, 0, noise, axis=axis)
        cf = mse_noise(abs(link.paths[0].gain) ** 2, 0.6, geo, 1.0, axis)
        assert fo == pytest.approx(cf, rel=0.02)


def test_first_order_tracks_simulation():
    geo = ArrayGeometry(8, 8, nt=8)
    link = _link([(1.0, 1.0, 0.4, 0.8), (0.7j, 1.9, -0.9, 2.2)])
    sc = single_link_scenario(link, geo)
    h0 = sc.channel(0, 0, 0, 0)
    sigma2 = 1e-3  # 30 dB
    rng = np.random.default_rng(11)
    err = np.zeros((2, 2))
    trials = 2000
    for _ in range(trials):
        est = estimate_doa(h0 + complex_gaussian(rng, h0.shape, sigma2), geo, 2)
        _, du, dv = match_paths(link.frequencies(geo), est)
        err += np.stack([du ** 2, dv ** 2])
    err /= trials
    noise = LowRankCovariance(np.zeros((geo.nr * geo.nt, 0), complex), np.zeros(0), sigma2)
    model = FirstOrderModel.from_link(link, geo)
    for a, axis in enumerate(("u", "v")):
        for l in range(2):
            pred = mse_first_order(link, geo, 0, noise, path=l, axis=axis, model=model)
            assert 0.5 <= err[a, l] / pred <= 2.0


@given(ANGLES, st.lists(ANGLES, min_size=1, max_size=20), st.sampled_from(["u", "v"]))
def test_combined_spatial_term_nonnegative(target, interferers, axis):
    geo = ArrayGeometry(5, 7)
    u2, v2 = np.array(interferers).T
    out = interference_terms(geo, target, (u2, v2), axis)
    assert np.all(out["combined"] >= -1e-9 * (1 + out["Y"] + out["Y_prime"]))


def test_coincident_interferer_gives_zero_pilot_mse():
    geo = ArrayGeometry(8, 8, nt=8)
    tp = TargetPath(0.4, -0.8, 1.0, 1.0)
    itf = Interferer(0.5, np.array([1.0]), np.array([0.4]), np.array([-0.8]), np.array([0.3]))
    for axis in ("u", "v"):
        assert mse_pilot(tp, [itf], geo, axis=axis) == pytest.approx(0.0, abs=1e-20)


def test_breakdown_zero_cases():
    one = mse_breakdown(_scenario(1, 3, m=8, nt=4), (0, 0), 0.1, 1.0)
    nocorr = mse_breakdown(_scenario(7, 2, m=8, nt=4), (0, 0), 0.0, 1.0)
    for axis in ("u", "v"):
        assert not one.get(axis, "pilot").any() and not one.get(axis, "inter").any()
        assert not nocorr.get(axis, "intra").any() and not nocorr.get(axis, "inter").any()
        np.testing.assert_array_equal(one.total(axis), sum(one.get(axis, c) for c in COMPONENTS))


def test_breakdown_homogeneous_of_degree_zero():
    sc = _scenario(7, 3, seed=8, m=8, nt=4)
    scaled = replace(sc, large_scale=7 * sc.large_scale)
    samples = PriorSamples.draw(InterferenceStats(500, seed=2), sc.geometry)
    for s in (None, samples):
        a = mse_breakdown(sc, (2, 4), 0.1, 0.3, samples=s)
        b = mse_breakdown(scaled, (2, 4), 0.1, 2.1, samples=s)
        for key, val in a.components.items():
            np.testing.assert_allclose(b.components[key], val, rtol=1e-12)
            assert np.all(val >= 0)


def test_prior_samples_required():
    tp = TargetPath(0.1, 0.2, 0.3, 1.0)
    with pytest.raises(DomainError):
        mse_pilot(tp, [Interferer(1.0, np.ones(2))], ArrayGeometry(4, 4))


def test_angle_conversion_examples():
    mt, mp = angle_mse_from_frequency_mse(0.02, 0.03, np.pi / 2, 0.7)
    assert mt == pytest.approx(0.02 / np.pi ** 2)
    assert mp == pytest.approx(0.03 / (np.pi ** 2 * np.sin(0.7) ** 2))
    _, mp = angle_mse_from_frequency_mse(0.02, 0.03, np.pi / 2, np.pi / 2)
    assert mp == pytest.approx(0.03 / np.pi ** 2)
    with pytest.raises(SingularJacobianError):
        angle_mse_from_frequency_mse(0.1, 0.1, 1e-4, 0.5)
    with pytest.raises(DomainError):
        angle_mse_from_frequency_mse(0.1, 0.1, 1.0, 0.5, rx_spacing_ratio=0.4)


def test_angle_conversion_matches_simulation():
    geo = ArrayGeometry(16, 16, nt=2)
    theta, phi = 1.1, 0.9
    link = LinkChannel((PathParams(0, 1.0, theta, phi, 1.2),))
    h0 = single_link_scenario(link, geo).channel(0, 0, 0, 0)
    rng = np.random.default_rng(4)
    d = []
    for _ in range(2000):
        est = estimate_doa(h0 + complex_gaussian(rng, h0.shape, 1e-3), geo, 1)
        u, v = link.frequencies(geo)
        d.append((u[0] - est.u[0], v[0] - est.v[0], theta - est.theta[0], phi - abs(est.phi[0])))
    d = np.array(d)
    mse_u, mse_v, mse_t, mse_p = np.mean(d ** 2, axis=0)
    pred_t, pred_p = angle_mse_from_frequency_mse(mse_u, mse_v, theta, phi)
    assert mse_t == pytest.approx(pred_t, rel=0.1)
    assert mse_p == pytest.approx(pred_p, rel=0.1)
