import numpy as np
import pytest

from sedpipe.errors import DataError
from sedpipe.learners import hmm_train, viterbi_decode, viterbi_path
from sedpipe.learners.hmm import LOG_ZERO, build_decoding_graph


def test_baum_welch_loglik_nondecreasing(rng):
    for run in range(5):
        seqs = [rng.normal(rng.uniform(-1, 1), 1.0, (rng.integers(8, 20), 3)) for _ in range(4)]
        model = hmm_train(seqs, n_states=2, n_mixtures=2, seed=run)
        ll = np.array(model.ll_history)
        assert len(ll) >= 1
        slack = 1e-9 * np.maximum(1.0, np.abs(ll[:-1]))
        assert np.all(np.diff(ll) >= -slack)


def test_single_state_single_mixture_closed_form(rng):
    seqs = [rng.normal(2.0, 1.5, (25, 2)) for _ in range(4)]
    model = hmm_train(seqs, n_states=1, n_mixtures=1, seed=0)
    frames = np.vstack(seqs)
    g = model.gmms[0]
    assert np.allclose(g.means[0], frames.mean(axis=0), atol=1e-9)
    assert np.allclose(g.variances[0], frames.var(axis=0), atol=1e-9)
    assert g.weights[0] == 1.0


def test_hmm_train_deterministic(rng):
    seqs = [rng.normal(0, 1, (12, 2)) for _ in range(3)]
    m1 = hmm_train(seqs, 2, 2, seed=5)
    m2 = hmm_train(seqs, 2, 2, seed=5)
    assert np.array_equal(m1.trans, m2.trans)
    for g1, g2 in zip(m1.gmms, m2.gmms):
        assert np.array_equal(g1.means, g2.means)
        assert np.array_equal(g1.variances, g2.variances)
        assert np.array_equal(g1.weights, g2.weights)


def test_sequence_shorter_than_states_raises(rng):
    with pytest.raises(DataError):
        hmm_train([rng.normal(size=(2, 2))], n_states=3, n_mixtures=1, seed=0)


def _enumerate_best_path(log_pi, log_trans, log_b):
    """All valid state paths by depth-first enumeration; returns the best."""
    t_len, n = log_b.shape
    best_score, best_path = -np.inf, None
    stack = [
        (0, s, log_pi[s] + log_b[0, s], [s]) for s in range(n) if log_pi[s] > LOG_ZERO / 2
    ]
    while stack:
        t, s, score, path = stack.pop()
        if t == t_len - 1:
            if score > best_score:
                best_score, best_path = score, path
            continue
        for s2 in range(n):
            step = log_trans[s, s2]
            if step > LOG_ZERO / 2:
                stack.append((t + 1, s2, score + step + log_b[t + 1, s2], path + [s2]))
    return best_path, best_score


def test_viterbi_matches_exhaustive_enumeration(rng):
    for trial in range(10):
        n_models = int(rng.integers(1, 3))
        models = {}
        for m in range(n_models):
            seqs = [rng.normal(m * 3.0, 1.0, (6, 2)) for _ in range(2)]
            models[f"m{m}"] = hmm_train(seqs, n_states=2, n_mixtures=1, seed=trial)
        bg = hmm_train([rng.normal(-3, 1, (6, 2)) for _ in range(2)], 1, 1, seed=trial)
        all_models = {"__background__": bg}
        for lab in sorted(models):
            all_models[lab] = models[lab]
        log_pi, log_trans, owners, labels = build_decoding_graph(all_models)
        t_len = int(rng.integers(2, 9))
        frames = rng.normal(0, 2, (t_len, 2))
        log_b = np.concatenate(
            [all_models[lab].state_log_prob(frames) for lab in labels], axis=1
        )
        path, score = viterbi_path(log_b, log_trans, log_pi)
        oracle_path, oracle_score = _enumerate_best_path(log_pi, log_trans, log_b)
        assert score == pytest.approx(oracle_score, abs=1e-9)
        assert path.tolist() == oracle_path


def test_viterbi_invariant_to_additive_constant(rng):
    n = 5
    log_pi = rng.normal(size=n)
    log_trans = rng.normal(size=(n, n))
    log_b = rng.normal(size=(12, n))
    p1, _ = viterbi_path(log_b, log_trans, log_pi)
    p2, _ = viterbi_path(log_b + 123.456, log_trans, log_pi)
    assert np.array_equal(p1, p2)


def test_decode_dominant_model_spans_all_frames(rng):
    near = hmm_train([rng.normal(0, 0.5, (10, 2)) for _ in range(3)], 2, 1, seed=1)
    far = hmm_train([rng.normal(50, 0.5, (10, 2)) for _ in range(3)], 2, 1, seed=1)
    bg = hmm_train([rng.normal(-50, 0.5, (10, 2)) for _ in range(3)], 1, 1, seed=1)
    frames = rng.normal(0, 0.5, (15, 2))
    segs = viterbi_decode({"near": near, "far": far}, bg, frames, hop=0.01, frame_len=0.02)
    assert len(segs) == 1
    onset, offset, label = segs[0]
    assert label == "near"
    assert onset == 0.0
    assert offset == pytest.approx(14 * 0.01 + 0.02)


def test_decode_segments_partition_no_overlap(rng):
    m1 = hmm_train([rng.normal(0, 1, (8, 2)) for _ in range(2)], 2, 1, seed=2)
    m2 = hmm_train([rng.normal(6, 1, (8, 2)) for _ in range(2)], 2, 1, seed=2)
    bg = hmm_train([rng.normal(-6, 1, (8, 2)) for _ in range(2)], 1, 1, seed=2)
    frames = np.vstack(
        [rng.normal(0, 1, (6, 2)), rng.normal(6, 1, (7, 2)), rng.normal(-6, 1, (5, 2))]
    )
    segs = viterbi_decode({"a": m1, "b": m2}, bg, frames, hop=0.01, frame_len=0.02)
    for (on1, off1, _), (on2, off2, _) in zip(segs, segs[1:]):
        assert off1 <= on2 + 1e-12
    for on, off, _ in segs:
        assert off > on


def test_decode_empty_frames_raises(rng):
    m = hmm_train([rng.normal(0, 1, (6, 2)) for _ in range(2)], 2, 1, seed=0)
    bg = hmm_train([rng.normal(3, 1, (6, 2)) for _ in range(2)], 1, 1, seed=0)
    with pytest.raises(DataError):
        viterbi_decode({"a": m}, bg, np.empty((0, 2)), hop=0.01, frame_len=0.02)
