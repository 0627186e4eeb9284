import numpy as np
import pytest

from ptframe.algebra import EigResult, eig, number
from ptframe.errors import SingularPointError
from ptframe.models import H1Params, H2Params, H3Params, build
from ptframe.spectra import (coalescence_metric, detect_eps, family, reality_check, sweep,
                             thread_count, track_step)


def _manual(E, V):
    n = len(E)
    return EigResult(np.asarray(E, dtype=complex), np.asarray(V, dtype=complex),
                     np.asarray(V, dtype=complex), np.zeros(n), np.ones(n), 1.0, 0.0)


def test_track_step_identity():
    res = eig(np.diag([1.0, 2.0, 3.5]))
    m = track_step(res, res)
    np.testing.assert_array_equal(m.permutation, [0, 1, 2])
    assert m.cost == pytest.approx(0.0, abs=1e-15)
    assert not m.ambiguous


def test_track_step_follows_vectors():
    prev = _manual([1.0, 1.2], np.eye(2))
    nxt = _manual([1.05, 1.15], np.eye(2)[:, ::-1])
    # eigenvalue proximity alone would pair 1.0 -> 1.05
    np.testing.assert_array_equal(track_step(prev, nxt, weight=1.0).permutation, [1, 0])
    np.testing.assert_array_equal(track_step(prev, nxt, weight=0.0).permutation, [0, 1])


def test_track_step_dimension_mismatch():
    with pytest.raises(ValueError):
        track_step(eig(np.eye(2)), eig(np.eye(3)))


def test_ambiguous_near_ep():
    a = eig(build(H1Params(1, 2 - 1e-6)).H)
    b = eig(build(H1Params(1, 2 + 1e-6)).H)
    assert track_step(a, b).ambiguous


def test_sweep_grid_validation():
    p = H1Params(1, 0)
    with pytest.raises(ValueError):
        sweep(p, "gamma_e", [1.0])
    with pytest.raises(ValueError):
        sweep(p, "gamma_e", [0.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        sweep(p, "gamma_e", [0.0, 1.0], frame="XF")


def test_h1_sweep_structure():
    grid = np.linspace(0, 4, 401)
    s = sweep(H1Params(1, 0), "gamma_e", grid, frame="EF")
    assert s.n_branches == 2
    below, above = grid < 2 - 1e-9, grid > 2 + 1e-9
    dre = np.abs(s.branches[0].real - s.branches[1].real)
    dim = np.abs(s.branches[0].imag - s.branches[1].imag)
    assert np.all(dre[below] > 1e-3) and np.all(dim[below] < 1e-10)
    assert np.all(dim[above] > 1e-3) and np.all(dre[above] < 1e-10)


def test_h1_detect_single_ep():
    s = sweep(H1Params(1, 0), "gamma_e", np.linspace(0, 4, 401), frame="IF")
    eps = detect_eps(s)
    assert len(eps) == 1
    assert eps[0].location == pytest.approx(2.0, abs=1e-6)
    assert eps[0].order_estimate == 2


def test_h2_ef_branches_meet():
    p = H2Params.from_kappa(g=1, kappa=0, gamma=0.3, n_max=4)
    grid = np.linspace(0, 2, 201)
    s = sweep(p, "kappa", grid, frame="EF")
    assert s.labels == ("c1d0", "c0d1", "c2d0", "c0d2")
    lam = np.sqrt(np.maximum(1 - grid ** 2, 0) + 0j) + 1j * np.sqrt(np.maximum(grid ** 2 - 1, 0))
    below = grid < 0.999
    for b, mult in enumerate((1, -1, 2, -2)):
        np.testing.assert_allclose(s.branches[b][below], mult * lam[below], atol=1e-10)
    k = np.argmin(np.abs(grid - 1))
    assert np.ptp(np.abs(s.branches[:, k])) < 1e-3
    (ep,) = detect_eps(s)
    assert ep.location == pytest.approx(1.0, abs=1e-6)
    assert ep.groups[0].order == 4


def test_h2_if_groups_by_photon_number():
    p = H2Params.from_kappa(g=1, kappa=0, gamma=0.3, n_max=4)
    s = sweep(p, "kappa", np.linspace(0, 2, 201), frame="IF")
    (ep,) = detect_eps(s, observable=number(p.layout))
    assert ep.location == pytest.approx(1.0, abs=1e-6)
    groups = {g.labels: g.expectations for g in ep.groups}
    assert set(groups) == {("c1d0", "c0d1"), ("c2d0", "c0d2")}
    np.testing.assert_allclose(groups[("c1d0", "c0d1")], [1, 1], atol=1e-6)
    np.testing.assert_allclose(groups[("c2d0", "c0d2")], [2, 2], atol=1e-6)


def test_hermitian_family_has_no_ep():
    p = H2Params(g=0.5, gamma_a=0, gamma_b=0, n_max=3)
    s = sweep(p, "g", np.linspace(0.5, 2, 31))
    assert detect_eps(s) == []
    assert max(w for _, w in reality_check(s)) <= 1e-12


def test_reality_check_h1():
    s = sweep(H1Params(1, 0), "gamma_e", np.linspace(0, 1.9, 96), frame="EF")
    assert max(w for _, w in reality_check(s)) <= 1e-10
    s = sweep(H1Params(1, 0), "gamma_e", [2.9, 3.0], frame="EF")
    assert reality_check(s)[1][1] == pytest.approx(np.sqrt(1.25), abs=1e-12)


def test_sweep_deterministic_across_threads():
    p = H2Params.from_kappa(g=1, kappa=0, gamma=0.3, n_max=3)
    grid = np.linspace(0, 2, 41)
    a = sweep(p, "kappa", grid, threads=1)
    b = sweep(p, "kappa", grid, threads=4)
    np.testing.assert_array_equal(a.branches, b.branches)
    np.testing.assert_array_equal(a.vectors, b.vectors)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("PTFRAME_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("PTFRAME_THREADS", "junk")
    assert thread_count() == 1


def test_custom_builder_family():
    s = sweep(lambda x: build(H1Params(1, x)), "gamma_e", np.linspace(0, 4, 101))
    assert s.labels == ("b0", "b1")
    assert detect_eps(s)[0].location == pytest.approx(2.0, abs=1e-6)
    assert family(s.family, "gamma_e") is s.family


def test_singular_point_named():
    p = H3Params.from_kappa(g=1, kappa=0, gamma=0.1, epsilon=0.1, n_max=4)
    with pytest.raises(SingularPointError, match="kappa=1"):
        sweep(p, "kappa", [0.5, 1.0])


def test_coalescence_metric():
    V = np.eye(2)
    assert coalescence_metric(np.array([1.0, 1.5]), V) == pytest.approx(1.5)
    assert coalescence_metric(np.array([1.0]), V[:, :1]) == np.inf
