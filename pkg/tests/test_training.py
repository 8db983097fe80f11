import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from beamkalman.training import (
    Measurement,
    PilotBook,
    build_pilot_book,
    kasami_small_set,
    m_sequence,
    measurement_matrix,
    periodic_cross_correlation,
    training_vector,
)


def test_m_sequence_balance_and_autocorrelation():
    u = m_sequence(6)
    assert u.size == 63
    assert u.sum() == 32
    acf = periodic_cross_correlation(u, u)
    assert acf[0] == 63
    assert set(acf[1:]) == {-1}


def test_m_sequence_rejects_bad_polynomial():
    with pytest.raises(ValueError):
        m_sequence(6, (5, 1, 0))
    with pytest.raises(ValueError):
        m_sequence(6, (6, 3, 0))  # x^6 + x^3 + 1 is not primitive


def test_kasami_shape_and_distinct_rows():
    k = kasami_small_set(6)
    assert k.shape == (8, 63)
    assert len({row.tobytes() for row in k}) == 8


def test_kasami_correlation_values():
    k = kasami_small_set(6)
    allowed = {-1, -9, 7}
    for i, j in itertools.product(range(8), repeat=2):
        c = periodic_cross_correlation(k[i], k[j])
        values = set(c[1:]) if i == j else set(c)
        assert values <= allowed, (i, j, values)
        if i == j:
            assert c[0] == 63


def test_kasami_other_degree():
    assert kasami_small_set(4).shape == (4, 15)


@pytest.mark.parametrize("degree", [5, 7])
def test_kasami_odd_degree(degree):
    with pytest.raises(ValueError):
        kasami_small_set(degree)


def test_pilot_book_last_sequences():
    k = kasami_small_set(6)
    book = build_pilot_book(63, 2, 1.0)
    assert_array_equal(book.sequences.real, 1.0 - 2.0 * k[6:8])
    assert set(np.unique(book.sequences.real)) == {-1.0, 1.0}


def test_pilot_book_energy():
    book = build_pilot_book(10, 3, 1000.0)
    assert_allclose(np.abs(book.sequences) ** 2, 1000.0)
    single = build_pilot_book(1, 1, 4.0)
    assert single.sequences.shape == (1, 1)
    assert abs(single.sequences[0, 0]) == pytest.approx(2.0)


@pytest.mark.parametrize("length, users", [(64, 1), (0, 1), (10, 9), (10, 0)])
def test_pilot_book_errors(length, users):
    with pytest.raises(ValueError):
        build_pilot_book(length, users)


def test_pilot_book_export(tmp_path):
    book = build_pilot_book(12, 2, 9.0)
    book.save(tmp_path / "pilots.txt")
    chips = np.loadtxt(tmp_path / "pilots.txt")
    assert_array_equal(chips, book.sequences.real / 3.0)


def test_training_vector_precursors_zero():
    book = PilotBook(np.array([[1 + 1j, 2.0], [3.0, -1j]]), 1.0)
    x = training_vector(book, 0, 3)
    assert_array_equal(x, [1 - 1j, 0, 0, 3.0, 0, 0])


def test_training_vector_memoryless():
    book = PilotBook(np.array([[1 + 1j, 2.0], [3.0, -1j]]), 1.0)
    assert_array_equal(training_vector(book, 1, 1), [2.0, 1j])


def test_training_vector_hand_assembly():
    seq = np.array([[1, -1, 1j, 2], [-1j, 1, -1, 3]], dtype=complex)
    x = training_vector(PilotBook(seq, 1.0), 2, 2)
    assert_array_equal(x, [np.conj(1j), np.conj(-1), np.conj(-1), np.conj(1)])


def test_training_vector_explicit_precursors():
    book = PilotBook(np.array([[1.0, 2.0]]), 1.0, precursors=np.array([[5.0, 7j]]))
    assert_array_equal(training_vector(book, 0, 3), [1.0, -7j, 5.0])


def test_training_vector_range():
    book = build_pilot_book(5, 1)
    with pytest.raises(ValueError):
        training_vector(book, 5, 2)
    with pytest.raises(ValueError):
        training_vector(book, -1, 2)


def test_measurement_identity_cases():
    assert_array_equal(measurement_matrix(np.array([1.0]), np.eye(3)).dense(), np.eye(3))
    psi = Measurement(np.array([1.0, 0.0, 0.0]), np.eye(2))
    h = np.arange(6.0)
    assert_array_equal(psi.adjoint(h), [0.0, 1.0])


def test_measurement_requires_dimension():
    with pytest.raises(ValueError):
        Measurement(np.ones(2))
    with pytest.raises(ValueError):
        measurement_matrix(np.ones(2), np.ones(3))
    psi = Measurement(np.ones(2), element_count=3)
    with pytest.raises(ValueError):
        psi.spatial(np.ones(5))
    with pytest.raises(ValueError):
        psi.apply(np.ones(2))
    with pytest.raises(ValueError):
        psi.quadratic(np.eye(5))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 8), kl=st.integers(1, 8), d=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_measurement_structured_equals_dense(n, kl, d, seed):
    if n * kl > 64:
        return
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(kl) + 1j * rng.standard_normal(kl)
    S = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    h = rng.standard_normal(kl * n) + 1j * rng.standard_normal(kl * n)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    P = rng.standard_normal((kl * n, kl * n)) + 1j * rng.standard_normal((kl * n, kl * n))
    psi = Measurement(x, S)
    dense = np.kron(x[:, None], S)
    assert psi.shape == dense.shape
    assert np.max(np.abs(psi.adjoint(h) - dense.conj().T @ h)) < 1e-12 * max(1.0, np.abs(h).sum() * np.abs(dense).max())
    assert_allclose(psi.apply(v), dense @ v, atol=1e-12 * np.abs(dense).max() * np.abs(v).sum())
    scale = np.abs(P).max() * np.abs(dense).max() ** 2 * (kl * n) ** 2
    assert np.max(np.abs(psi.right_product(P) - P @ dense)) < 1e-13 * scale
    assert np.max(np.abs(psi.quadratic(P) - dense.conj().T @ P @ dense)) < 1e-13 * scale


def test_pilot_gram_close_to_expectation():
    # X = [x_62, ..., x_0] over full-length pilots with K=2 users and L=3 taps
    book = build_pilot_book(63, 2, 1.0)
    X = np.column_stack([training_vector(book, n, 3) for n in range(63)])
    gram = X @ X.conj().T / 63
    assert np.linalg.norm(gram - np.eye(6), 2) < 0.5
