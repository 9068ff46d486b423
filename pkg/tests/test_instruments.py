"""Instrument Choi vectors, Pauli bases, unitary-butterfly basis, weak unitaries."""

import numpy as np
import pytest

from ptchaos.instruments import (
    ButterflyFlutter,
    RankOneInstrument,
    butterfly_basis,
    choi_of_instrument,
    flutter_choi,
    flutter_from_json,
    flutter_overlap,
    flutter_to_json,
    generalized_paulis,
    identity_flutter,
    projective_flutters,
    validate_complete_family,
    weak_unitary,
)
from ptchaos.qcore import inner, is_unitary

X = np.array([[0, 1], [1, 0]], dtype=complex)


def haar(d, rng):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_identity_choi_is_phi_plus():
    ch = choi_of_instrument(RankOneInstrument(np.eye(2)))
    assert np.allclose(ch.amplitudes, [1, 0, 0, 1])
    assert abs(ch.norm_squared - 2.0) < 1e-12


def test_projector_choi():
    p0 = RankOneInstrument(np.diag([1.0, 0.0]))
    ch = choi_of_instrument(p0)
    assert np.allclose(ch.amplitudes, [1, 0, 0, 0])
    assert abs(ch.norm_squared - 1.0) < 1e-12


def test_choi_overlap_is_trace_overlap(rng):
    # <choi(A)|choi(B)> = tr[A^dag B]
    for _ in range(20):
        a = haar(3, rng)
        b = haar(3, rng)
        got = inner(choi_of_instrument(RankOneInstrument(a)),
                    choi_of_instrument(RankOneInstrument(b)))
        assert abs(got - np.trace(a.conj().T @ b)) < 1e-12


def test_non_square_kraus_rejected():
    with pytest.raises(ValueError):
        RankOneInstrument(np.ones((2, 3)))


def test_norm_increasing_kraus_rejected():
    with pytest.raises(ValueError):
        RankOneInstrument(np.diag([1.5, 1.0]))


def test_identity_flutter_norms():
    # unnormalized squared norm 2^k; supernormalized reaches d_S^(2k)
    for k in (1, 2, 3):
        fl = identity_flutter(k, 2)
        assert abs(fl.choi.norm_squared - 2**k) < 1e-12
        assert abs(fl.supernorm_squared() - 4**k) < 1e-10


def test_flutter_overlap_pauli_orthogonality():
    x = flutter_choi([RankOneInstrument(X), RankOneInstrument(np.eye(2))])
    y = identity_flutter(2, 2)
    assert abs(flutter_overlap(x, y)) < 1e-14


def test_flutter_overlap_factorizes(rng):
    for _ in range(10):
        a1, a2, b1, b2 = (haar(2, rng) for _ in range(4))
        x = flutter_choi([RankOneInstrument(a1), RankOneInstrument(a2)])
        y = flutter_choi([RankOneInstrument(b1), RankOneInstrument(b2)])
        oracle = np.trace(a1.conj().T @ b1) * np.trace(a2.conj().T @ b2)
        assert abs(flutter_overlap(x, y) - oracle) < 1e-12


def test_mixed_dimension_flutter_rejected():
    with pytest.raises(ValueError):
        flutter_choi([RankOneInstrument(np.eye(2)), RankOneInstrument(np.eye(3))])


def test_generalized_paulis_qubit():
    sigmas = generalized_paulis(2)
    assert len(sigmas) == 4
    for i, a in enumerate(sigmas):
        assert is_unitary(a, 1e-12)
        for j, b in enumerate(sigmas):
            got = np.trace(a.conj().T @ b)
            assert abs(got - (2.0 if i == j else 0.0)) < 1e-12


def test_generalized_paulis_qutrit_exhaustive():
    sigmas = generalized_paulis(3)
    assert len(sigmas) == 9
    for i, a in enumerate(sigmas):
        assert is_unitary(a, 1e-12)
        for j, b in enumerate(sigmas):
            got = np.trace(a.conj().T @ b) / 3.0
            assert abs(got - (1.0 if i == j else 0.0)) < 1e-12


def test_paulis_reject_small_dim():
    with pytest.raises(ValueError):
        generalized_paulis(1)


@pytest.mark.parametrize("k", [1, 2])
def test_butterfly_basis_gram_and_completeness(k):
    d_s = 2
    d_b = d_s ** (2 * k)
    basis = butterfly_basis(k, d_s)
    assert len(basis) == d_b
    vecs = np.array([fl.supernormalized() for fl in basis])
    gram = vecs.conj() @ vecs.T
    assert np.abs(gram - d_b * np.eye(d_b)).max() < 1e-12
    resolve = sum(np.outer(v, v.conj()) for v in vecs) / d_b
    assert np.abs(resolve - np.eye(d_b)).max() < 1e-10


def test_butterfly_basis_with_final_leg():
    ext = butterfly_basis(1, 2, final_dim=3)
    assert len(ext) == 4 * 3
    fl, r = ext[5]
    assert isinstance(fl, ButterflyFlutter) and 0 <= r < 3


def test_complete_projective_family():
    flutters = projective_flutters(2, 2)
    assert len(flutters) == 4
    # Choi vectors of the single-time family sum-resolve phi+ diagonal blocks
    projs = [RankOneInstrument(np.diag([1.0, 0.0])), RankOneInstrument(np.diag([0.0, 1.0]))]
    validate_complete_family(projs)
    acc = sum(
        np.outer(choi_of_instrument(p).amplitudes, choi_of_instrument(p).amplitudes.conj())
        for p in projs
    )
    phi = np.array([1, 0, 0, 1.0])
    assert np.abs(acc - np.diag(np.outer(phi, phi).diagonal())).max() < 1e-12


def test_incomplete_family_rejected():
    with pytest.raises(ValueError):
        validate_complete_family([RankOneInstrument(np.diag([1.0, 0.0]))])


def test_weak_unitary_trace_and_unitarity():
    for eps in (0.05, 0.1, 0.3):
        w = weak_unitary(eps, 2, seed=11)
        assert is_unitary(w, 1e-10)
        assert abs(abs(np.trace(w)) - (1 - eps) * 2) < 1e-8


def test_weak_unitary_small_epsilon_limit():
    w = weak_unitary(1e-6, 2, seed=3)
    # W approaches a global phase times identity
    phase = np.trace(w) / abs(np.trace(w))
    assert np.abs(w / phase - np.eye(2)).max() < 5e-3


def test_weak_unitary_choi_consistency():
    eps = 0.1
    w = weak_unitary(eps, 2, seed=7)
    ch_w = choi_of_instrument(RankOneInstrument(w))
    ch_i = choi_of_instrument(RankOneInstrument(np.eye(2)))
    # <choi(W)|choi(1)> = tr[W^dag]; modulus (1-eps) d_S
    assert abs(abs(inner(ch_w, ch_i)) - (1 - eps) * 2) < 1e-8


def test_weak_unitary_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        weak_unitary(0.0, 2, seed=1)
    with pytest.raises(ValueError):
        weak_unitary(1.0, 2, seed=1)


def test_flutter_json_roundtrip(rng):
    fl = flutter_choi([RankOneInstrument(haar(2, rng), outcome_label="u")],
                      flutter_id="probe")
    back = flutter_from_json(flutter_to_json(fl))
    assert back.flutter_id == "probe"
    assert np.abs(back.choi.amplitudes - fl.choi.amplitudes).max() < 1e-15
