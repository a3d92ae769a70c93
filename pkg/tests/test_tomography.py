from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamspdc.errors import RankDeficient, RankDeficientWarning, SchemaError
from oamspdc.exports import read_counts_csv, write_counts_csv
from oamspdc.measurement import mes_state, white_noise
from oamspdc.tomography import (
    TomographyCounts,
    _objective,
    bootstrap_errors,
    build_mub_set,
    expected_probabilities,
    fidelity,
    gell_mann_basis,
    linear_entropy,
    linear_reconstruct,
    mle_reconstruct,
    mub_vectors,
    params_from_rho,
    rho_from_params,
    simulate_tomography,
)

FULL = build_mub_set(mode="full144")
FOURIER = build_mub_set(mode="paper81")
MES = np.outer(mes_state(), mes_state().conj())


def random_rho(rng, rank=9):
    G = rng.normal(size=(9, rank)) + 1j * rng.normal(size=(9, rank))
    r = G @ G.conj().T
    return r / np.trace(r).real


def test_gell_mann_orthonormal():
    ops = gell_mann_basis(3)
    assert len(ops) == 9
    gram = np.array([[np.trace(a @ b).real for b in ops] for a in ops])
    assert np.allclose(gram - np.diag(np.diag(gram)), 0, atol=1e-12)
    assert np.allclose(np.diag(gram)[1:], np.diag(gram)[1], atol=1e-12)
    for a in ops:
        assert np.allclose(a, a.conj().T)


def test_mub_unbiasedness():
    B = mub_vectors(3)
    assert B.shape == (4, 3, 3)
    for b in range(4):
        assert np.allclose(B[b].conj() @ B[b].T, np.eye(3), atol=1e-12)
        for c in range(b + 1, 4):
            ov = np.abs(B[b].conj() @ B[c].T) ** 2
            assert np.allclose(ov, 1 / 3, atol=1e-12)


def test_projector_set_sizes_and_completeness():
    assert len(FULL) == 144 and len(FOURIER) == 81
    for mub in (FULL, FOURIER):
        S = mub.projectors.sum(axis=0)
        assert np.allclose(S, mub.basis_sum * np.eye(9), atol=1e-12)


def test_full_set_informationally_complete():
    from oamspdc.tomography import _design_matrix

    assert np.linalg.matrix_rank(_design_matrix(FULL)) == 81
    assert np.linalg.matrix_rank(_design_matrix(FOURIER)) < 81


@pytest.mark.parametrize("rho, tol", [(MES, 1e-8), (np.eye(9) / 9, 1e-10)])
def test_linear_round_trip(rho, tol):
    c = simulate_tomography(rho, FULL, 15.0, 20.0, seed=None)
    est = linear_reconstruct(c, FULL)
    assert np.max(np.abs(est - rho)) < tol
    assert np.allclose(est, est.conj().T)


def test_fourier_set_rank_deficient():
    c = simulate_tomography(MES, FOURIER, 15.0, 20.0, seed=None)
    with pytest.raises(RankDeficient):
        linear_reconstruct(c, FOURIER)
    with pytest.warns(RankDeficientWarning):
        est = linear_reconstruct(c, FOURIER, allow_rank_deficient=True)
    assert abs(np.trace(est).real - 1) < 1e-12


def test_param_map_round_trip():
    rng = np.random.default_rng(3)
    rho = random_rho(rng)
    back, _, _ = rho_from_params(params_from_rho(rho))
    assert np.max(np.abs(back - rho)) < 1e-12


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    c = simulate_tomography(white_noise(mes_state(), 0.8), FULL, 15.0, 20.0, seed=2)
    n = c.rates
    N = n.sum() / FULL.basis_sum
    t = params_from_rho(random_rho(rng))
    _, g = _objective(t, FULL.vectors, n, N, 9)
    h = 1e-6
    for k in rng.choice(81, 12, replace=False):
        e = np.zeros(81)
        e[k] = h
        fd = (_objective(t + e, FULL.vectors, n, N, 9)[0] - _objective(t - e, FULL.vectors, n, N, 9)[0]) / (2 * h)
        assert abs(fd - g[k]) <= 1e-5 * max(1.0, abs(g[k]))


def test_mle_noiseless_mes():
    c = simulate_tomography(MES, FULL, 15.0, 20.0, seed=None)
    res = mle_reconstruct(c, FULL, full_output=True)
    assert fidelity(MES, res.rho) > 0.9999
    again = mle_reconstruct(c, FULL, init=res.rho, full_output=True)
    assert again.iterations <= 2


def test_mle_restart_from_output_noisy():
    c = simulate_tomography(white_noise(mes_state(), 0.84), FULL, 15.0, 20.0, seed=11)
    res = mle_reconstruct(c, FULL, full_output=True)
    again = mle_reconstruct(c, FULL, init=res.rho, full_output=True)
    assert again.iterations <= 2
    assert abs(again.value - res.value) <= 1e-8 * max(1.0, res.value)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(0, 400), min_size=144, max_size=144))
def test_mle_output_is_state(raw):
    if sum(raw) == 0:
        raw[0] = 1
    c = TomographyCounts(list(FULL.labels), raw, 20.0)
    rho = mle_reconstruct(c, FULL)
    assert abs(np.trace(rho).real - 1) < 1e-12
    assert np.allclose(rho, rho.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(rho).min() >= -1e-12


def test_mle_equals_linear_for_interior_states():
    rng = np.random.default_rng(21)
    for _ in range(20):
        rho = 0.5 * random_rho(rng) + 0.5 * np.eye(9) / 9
        c = simulate_tomography(rho, FULL, 15.0, 20.0, seed=None)
        lin = linear_reconstruct(c, FULL)
        mle = mle_reconstruct(c, FULL)
        assert np.max(np.abs(mle - lin)) < 1e-6


def test_phase_shows_in_imaginary_parts():
    psi = mes_state(0.6, 0.0)
    c = simulate_tomography(np.outer(psi, psi.conj()), FULL, 15.0, 20.0, seed=None)
    rho = mle_reconstruct(c, FULL)
    # amplitude on |0,0> carries exp(i 0.6) relative to |-1,-1> and |1,1>
    assert abs(abs(rho[0, 4].imag) - math.sin(0.6) / 3) < 1e-4
    assert abs(abs(rho[4, 8].imag) - math.sin(0.6) / 3) < 1e-4


def test_fidelity_identities():
    rng = np.random.default_rng(8)
    a, b = random_rho(rng), random_rho(rng)
    assert abs(fidelity(a, a) - 1) < 1e-9
    assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-9
    psi = mes_state()
    assert abs(fidelity(psi, b) - np.real(psi.conj() @ b @ psi)) < 1e-12
    assert abs(fidelity(MES, np.eye(9) / 9) - 1 / 9) < 1e-12


def test_fidelity_monotone_in_visibility():
    vals = [fidelity(MES, white_noise(mes_state(), v)) for v in np.linspace(0, 1, 11)]
    assert all(x < y for x, y in zip(vals, vals[1:]))
    for v, f in zip(np.linspace(0, 1, 11), vals):
        assert abs(f - (v + (1 - v) / 9)) < 1e-12


def test_linear_entropy_identities():
    assert abs(linear_entropy(MES)) < 1e-14
    assert abs(linear_entropy(np.eye(9) / 9) - 8 / 9) < 1e-14
    v = 0.7
    expected = 1 - (v**2 + 2 * v * (1 - v) / 9 + (1 - v) ** 2 / 9)
    assert abs(linear_entropy(white_noise(mes_state(), v)) - expected) < 1e-12


def test_simulation_contracts():
    p = expected_probabilities(MES, FULL)
    assert np.all(p >= -1e-15)
    assert abs(p.sum() - FULL.basis_sum) < 1e-10
    a = simulate_tomography(MES, FULL, 15.0, 20.0, seed=3)
    b = simulate_tomography(MES, FULL, 15.0, 20.0, seed=3)
    assert np.array_equal(a.counts, b.counts)
    assert np.all(a.counts == np.round(a.counts))
    with pytest.raises(ValueError):
        TomographyCounts(list(FULL.labels), -np.ones(144), 1.0)


def test_bootstrap_deterministic_and_scaling():
    rho = white_noise(mes_state(), 0.84)
    c1 = simulate_tomography(rho, FULL, 15.0, 20.0, seed=None)
    c4 = simulate_tomography(rho, FULL, 60.0, 20.0, seed=None)
    b1 = bootstrap_errors(c1, FULL, 100, seed=1, target=MES)
    again = bootstrap_errors(c1, FULL, 100, seed=1, target=MES)
    assert b1["fidelity_std"] == again["fidelity_std"]
    b4 = bootstrap_errors(c4, FULL, 100, seed=1, target=MES)
    ratio = b1["fidelity_std"] / b4["fidelity_std"]
    assert 1.6 < ratio < 2.5  # four times the counts halves the spread
    with pytest.raises(ValueError):
        bootstrap_errors(c1, FULL, 50)


def test_counts_csv_round_trip(tmp_path):
    c = simulate_tomography(MES, FULL, 15.0, 20.0, seed=4)
    path = tmp_path / "counts.csv"
    write_counts_csv(path, c)
    back = read_counts_csv(path, FULL)
    assert np.array_equal(back.counts, c.counts)
    assert back.labels == c.labels


def test_counts_csv_schema_errors(tmp_path):
    c = simulate_tomography(MES, FULL, 15.0, 20.0, seed=4)
    good = tmp_path / "good.csv"
    write_counts_csv(good, c)
    lines = good.read_text().splitlines()

    def variant(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p

    cases = [
        variant("cols.csv", "\n".join([lines[0].replace("seconds", "secs")] + lines[1:]) + "\n"),
        variant("missing.csv", "\n".join(lines[:-1]) + "\n"),
        variant("dup.csv", "\n".join(lines + [lines[1]]) + "\n"),
        variant("bad.csv", "\n".join(lines[:1] + [lines[1].replace(",20.0", ",abc")] + lines[2:]) + "\n"),
        variant("neg.csv", "\n".join(lines[:1] + ["0,0,0,0,0,-5,20.0"] + lines[2:]) + "\n"),
    ]
    for p in cases:
        with pytest.raises(SchemaError):
            read_counts_csv(p, FULL)
    with pytest.raises(SchemaError):
        read_counts_csv(good, FOURIER)
    with pytest.raises(SchemaError):
        read_counts_csv(tmp_path / "absent.csv", FULL)


@pytest.mark.slow
def test_fidelity_estimator_coverage():
    # across independent experiments the bootstrap spread should track the actual spread
    rho = white_noise(mes_state(), 0.84)
    fids = []
    for s in range(40):
        c = simulate_tomography(rho, FULL, 15.0, 20.0, seed=1000 + s)
        fids.append(fidelity(MES, mle_reconstruct(c, FULL)))
    c = simulate_tomography(rho, FULL, 15.0, 20.0, seed=None)
    boot = bootstrap_errors(c, FULL, 100, seed=2, target=MES)["fidelity_std"]
    actual = float(np.std(fids, ddof=1))
    assert 0.6 < boot / actual < 1.6
