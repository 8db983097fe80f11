import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import linalg

from beamkalman import kalman as kf
from beamkalman.beamspace import fixed_geb, sequential_geb
from beamkalman.channel import ArModel, ChannelState, GaussianInterference, observe_full, sample_initial
from beamkalman.covariance import ExtendedChannelCovariance
from beamkalman.training import Measurement, build_pilot_book, training_vector

from .conftest import random_pd, random_psd


def _textbook_update(P, h, y, H, R):
    """Dense Kalman update with H = Psi^H and noise covariance R."""
    S = H @ P @ H.conj().T + R
    K = P @ H.conj().T @ np.linalg.inv(S)
    return h + K @ (y - H @ h), P - K @ H @ P


def _random_instance(rng, n, users, memory, d=None):
    blocks = [random_psd(rng, n) / memory for _ in range(memory)]
    R_h = ExtendedChannelCovariance(blocks, users)
    r_eta = random_pd(rng, n, floor=0.3)
    S = np.eye(n, dtype=complex) if d is None else np.linalg.qr(rng.standard_normal((n, d)) + 0j)[0]
    x = np.sign(rng.standard_normal(users * memory)) * np.sqrt(3.0) + 0j
    return R_h, r_eta, S, x


def test_init_identity():
    st_ = kf.init(np.eye(3), user_count=1)
    assert_allclose(st_.covariance, np.eye(3))
    assert not st_.estimate.any()
    assert st_.phase == kf.PREDICTED
    with pytest.raises(ValueError):
        kf.init(np.eye(3))


def test_init_mse_is_one():
    blocks = [np.eye(2) / 4, np.eye(2) / 4]
    assert kf.mse(kf.init(ExtendedChannelCovariance(blocks, 3))) == pytest.approx(1.0)


def test_scalar_update():
    state = kf.init(np.eye(1), user_count=1)
    post, rec = kf.measurement_update(state, np.array([0.8 - 0.4j]), Measurement([1.0], np.eye(1)), np.eye(1))
    assert_allclose(rec.covariance, [[2.0]])
    assert_allclose(rec.gain, [[0.5]])
    assert_allclose(post.estimate, [0.4 - 0.2j])
    assert_allclose(post.covariance, [[0.5]])
    assert post.phase == kf.UPDATED


def test_zero_pilot_leaves_state(rng):
    R_h, r_eta, S, x = _random_instance(rng, 3, 1, 2)
    state = kf.init(R_h)
    post, rec = kf.measurement_update(state, np.array([1.0, 2.0, 3.0]), Measurement(np.zeros(2), S), r_eta)
    assert not rec.gain.any()
    assert_allclose(post.covariance, state.covariance)
    assert_allclose(post.estimate, state.estimate)
    assert kf.information_form_check(state, post, Measurement(np.zeros(2), S), r_eta) < 1e-12


def test_update_needs_predicted_state(rng):
    state = kf.init(np.eye(2), user_count=1)
    psi = Measurement([1.0], np.eye(2))
    post, _ = kf.measurement_update(state, np.zeros(2), psi, np.eye(2))
    with pytest.raises(ValueError):
        kf.measurement_update(post, np.zeros(2), psi, np.eye(2))
    with pytest.raises(ValueError):
        kf.measurement_update(state, np.zeros(3), psi, np.eye(2))


def test_singular_innovation_raises():
    state = kf.init(np.zeros((2, 2)), user_count=1)
    with pytest.raises(linalg.LinAlgError):
        kf.measurement_update(state, np.zeros(2), Measurement([1.0], np.eye(2)), np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 6),
    users=st.integers(1, 2),
    memory=st.integers(1, 3),
    d=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_update_matches_textbook(n, users, memory, d, seed):
    d = min(d, n)
    rng = np.random.default_rng(seed)
    R_h, r_eta, S, x = _random_instance(rng, n, users, memory, d)
    state = kf.init(R_h)
    state = kf.KalmanState(rng.standard_normal(R_h.dim) + 0j, state.covariance, users)
    y = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    psi = Measurement(x, S)
    post, rec = kf.measurement_update(state, y, psi, r_eta)
    h_ref, P_ref = _textbook_update(state.covariance, state.estimate, y, psi.dense().conj().T, S.conj().T @ r_eta @ S)
    assert_allclose(post.estimate, h_ref, atol=1e-10)
    assert_allclose(post.covariance, P_ref, atol=1e-10)
    joseph, _ = kf.measurement_update(state, y, psi, r_eta, joseph=True)
    assert_allclose(joseph.covariance, post.covariance, atol=1e-10)
    # information never decreases under an update
    assert np.linalg.eigvalsh(state.covariance - post.covariance).min() >= -1e-10
    assert kf.mse(post) <= kf.mse(state) + 1e-12


def test_predict_limits(rng):
    R = random_psd(rng, 3)
    state = kf.KalmanState(rng.standard_normal(3) + 0j, random_psd(rng, 3), 1)
    same = kf.predict(state, 1.0, R)
    assert_allclose(same.covariance, state.covariance)
    assert_allclose(same.estimate, state.estimate)
    reset = kf.predict(state, 0.0, R)
    assert_allclose(reset.covariance, R)
    assert not reset.estimate.any()
    assert reset.epoch == 1 and reset.phase == kf.PREDICTED


def test_multi_step_prediction(rng):
    R = random_psd(rng, 4)
    state = kf.KalmanState(rng.standard_normal(4) + 0j, random_psd(rng, 4, scale=0.1), 1)
    one = kf.multi_step_predict(state, 0.97, R, 1)
    assert_allclose(one.covariance, kf.predict(state, 0.97, R).covariance)
    three = kf.multi_step_predict(state, 0.97, R, 3)
    two_then_one = kf.multi_step_predict(kf.multi_step_predict(state, 0.97, R, 2), 0.97, R, 1)
    assert_allclose(three.covariance, two_then_one.covariance, atol=1e-14)
    assert_allclose(three.estimate, two_then_one.estimate, atol=1e-14)
    slow = kf.multi_step_predict(state, 0.9999, R, 5)
    assert 1 - 0.9999**10 == pytest.approx(1e-3, rel=1e-3)
    gap = np.trace(R).real - np.trace(state.covariance).real
    assert np.trace(slow.covariance).real - np.trace(state.covariance).real == pytest.approx((1 - 0.9999**10) * gap)
    with pytest.raises(ValueError):
        kf.multi_step_predict(state, 0.9, R, -1)


def test_information_form_identity(rng):
    for _ in range(20):
        R_h, r_eta, S, x = _random_instance(rng, 4, 1, 2, 3)
        prior = kf.init(R_h.materialize() + 0.05 * np.eye(8), user_count=1)
        post, _ = kf.measurement_update(prior, np.zeros(3), Measurement(x, S), r_eta)
        assert kf.information_form_check(prior, post, Measurement(x, S), r_eta) < 1e-8
    prior = kf.init(np.eye(4) * 2.0, user_count=1)
    full = Measurement([1.0], np.eye(4))
    post, _ = kf.measurement_update(prior, np.zeros(4), full, np.eye(4))
    assert_allclose(linalg.inv(post.covariance), linalg.inv(prior.covariance) + np.eye(4))
    assert kf.information_form_check(prior, post, full, np.eye(4)) < 1e-14


def test_information_form_singular_is_infinite():
    prior = kf.init(np.diag([1.0, 0.0]), user_count=1)
    post, _ = kf.measurement_update(prior, np.zeros(2), Measurement([1.0], np.eye(2)), np.eye(2))
    assert kf.information_form_check(prior, post, Measurement([1.0], np.eye(2)), np.eye(2)) == float("inf")


def test_batch_oracle_scalar_and_empty():
    est, P = kf.batch_mmse_oracle([np.array([0.8 - 0.4j])], [np.array([1.0])], np.eye(1), np.eye(1))
    assert_allclose(est, [0.4 - 0.2j])
    assert_allclose(P, [[0.5]])
    est, P = kf.batch_mmse_oracle([], [], 2 * np.eye(3), np.eye(3))
    assert not est.any()
    assert_allclose(P, 2 * np.eye(3))


def test_batch_oracle_guards():
    with pytest.raises(ValueError):
        kf.batch_mmse_oracle([], [], np.eye(2), np.eye(2), alpha=0.9)
    with pytest.raises(ValueError):
        kf.batch_mmse_oracle([], [], np.eye(65), np.eye(65))
    with pytest.raises(ValueError):
        kf.batch_mmse_oracle([np.zeros(2)], [], np.eye(2), np.eye(2))


def _run_full_rank(R_h, r_eta, book, memory, snapshots, S=None):
    n = r_eta.shape[0]
    S = np.eye(n, dtype=complex) if S is None else S
    state = kf.init(R_h)
    out = []
    for t, y in enumerate(snapshots):
        psi = Measurement(training_vector(book, t, memory), S)
        state, _ = kf.measurement_update(state, S.conj().T @ y, psi, r_eta)
        out.append(state)
        state = kf.predict(state, 1.0, R_h.materialize())
    return out


def test_full_rank_filter_matches_batch_oracle(rng):
    n, users, memory, T = 4, 2, 2, 8
    R_h, r_eta, _, _ = _random_instance(rng, n, users, memory)
    book = build_pilot_book(T, users, 2.0)
    model = ArModel.from_covariance(R_h, 1.0)
    h = sample_initial(model, rng)
    pilots = [training_vector(book, t, memory) for t in range(T)]
    snaps = [observe_full(h, x, GaussianInterference(r_eta), rng) for x in pilots]
    states = _run_full_rank(R_h, r_eta, book, memory, snaps)
    for t, state in enumerate(states):
        est, P = kf.batch_mmse_oracle(snaps[: t + 1], pilots[: t + 1], R_h, r_eta)
        assert np.linalg.norm(state.estimate - est) <= 1e-8 * np.linalg.norm(est)
        assert np.linalg.norm(state.covariance - P) <= 1e-8 * np.linalg.norm(P)


def test_reduced_filter_matches_projected_batch_oracle(rng):
    n, users, memory, T = 5, 1, 2, 6
    R_h, r_eta, S, _ = _random_instance(rng, n, users, memory, 3)
    book = build_pilot_book(T, users, 1.0)
    h = ChannelState(rng.standard_normal(R_h.dim) + 1j * rng.standard_normal(R_h.dim))
    pilots = [training_vector(book, t, memory) for t in range(T)]
    snaps = [observe_full(h, x, GaussianInterference(r_eta), rng) for x in pilots]
    last = _run_full_rank(R_h, r_eta, book, memory, snaps, S)[-1]
    est, P = kf.batch_mmse_oracle(snaps, pilots, R_h, r_eta, beamformer=S)
    assert_allclose(last.estimate, est, atol=1e-9)
    assert_allclose(last.covariance, P, atol=1e-9)


def test_covariance_stays_psd_over_long_run(rng):
    n, users, memory = 3, 1, 2
    R_h, r_eta, S, _ = _random_instance(rng, n, users, memory, 2)
    R_dense = R_h.materialize()
    state = kf.init(R_h)
    for t in range(1000):
        x = np.sign(rng.standard_normal(users * memory)) * 30.0 + 0j
        state, _ = kf.measurement_update(state, np.zeros(2), Measurement(x, S), r_eta)
        for P in (state.covariance,):
            assert np.max(np.abs(P - P.conj().T)) < 1e-10
            assert np.linalg.eigvalsh(P).min() >= -1e-9 * np.trace(P).real
        state = kf.predict(state, 0.9999, R_dense)
        assert np.linalg.eigvalsh(state.covariance).min() >= -1e-9 * np.trace(state.covariance).real


def test_mse_monotone_in_nested_geb(desk_stats, desk_config):
    cfg = desk_config
    R = desk_stats.r_h_dense
    out = []
    pdp = cfg.serving.pdp
    prev = None
    for D in (2, 4, 6, 8, 12):
        S = fixed_geb(desk_stats.spatial, desk_stats.r_eta, D, pdp).columns
        if prev is not None:
            # span(S_D) contains span(S_D') for D' < D
            q, _ = np.linalg.qr(S)
            assert np.linalg.norm(prev - q @ (q.conj().T @ prev)) < 1e-8
        prev = S
        state = kf.init(desk_stats.r_h)
        for t in range(cfg.T):
            psi = Measurement(training_vector(desk_stats.book, t, 3), S)
            state, rec = kf.measurement_update(state, np.zeros(D), psi, desk_stats.r_eta)
            state = kf.predict(state, cfg.alpha, R)
        out.append(kf.mse(state))
    assert all(b <= a + 1e-10 for a, b in zip(out, out[1:]))


def test_geb_makes_interference_term_white(desk_stats):
    bf = sequential_geb(desk_stats.spatial, desk_stats.r_eta, 6, 2, 1000.0, 5, 0.9999, 2)[1]
    state = kf.init(desk_stats.r_h)
    psi = Measurement(training_vector(desk_stats.book, 7, 3), bf.columns)
    _, rec = kf.measurement_update(state, np.zeros(6), psi, desk_stats.r_eta)
    noise = rec.covariance - psi.quadratic(state.covariance)
    assert_allclose(noise, np.eye(6), atol=1e-8)


def test_mse_vanishes_with_perfect_observation(rng):
    R_h = ExtendedChannelCovariance([random_psd(rng, 3)], 1)
    state = kf.init(R_h)
    post, _ = kf.measurement_update(state, np.zeros(3), Measurement([1.0], np.eye(3)), 1e-12 * np.eye(3))
    assert kf.mse(post) < 1e-10
    assert kf.squared_error(post, np.zeros(3)) == 0.0


def test_block_covariance_matches_dense_update(rng):
    n, users, memory = 4, 2, 3
    blocks = [random_pd(rng, n, 0.05) / memory for _ in range(memory)]
    bc = kf.BlockCovariance.from_extended(ExtendedChannelCovariance(blocks, users))
    r_eta = random_pd(rng, n)
    S = np.linalg.qr(rng.standard_normal((n, 2)) + 0j)[0]
    dense = kf.idealized_update_dense(bc.materialize(), S, r_eta, 20.0, 5, users * memory)
    block = bc.idealized_update(S, r_eta, 20.0, 5)
    assert_allclose(block.materialize(), dense, atol=1e-12)
    # the update keeps the block-diagonal form: zero off-block mass
    mask = np.abs(bc.materialize()) == 0
    assert np.max(np.abs(dense[mask])) < 1e-12
    assert block.trace() == pytest.approx(np.trace(dense).real)
    assert block.logdet() == pytest.approx(np.linalg.slogdet(dense)[1])
    pred = block.predict(0.9, 5, blocks)
    assert_allclose(pred.blocks[0], 0.9**10 * block.blocks[0] + (1 - 0.9**10) * blocks[0])


def test_log_volume_and_basis(rng):
    R = random_psd(rng, 5, rank=2)
    U = kf.significant_basis(R)
    assert U.shape == (5, 2)
    assert kf.log_volume(R, U) == pytest.approx(np.sum(np.log(np.linalg.eigvalsh(R)[-2:])))
    assert kf.log_volume(np.zeros((5, 5)), U) == float("-inf")
