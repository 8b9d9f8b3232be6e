"""Left-to-right GMM-HMMs: Baum-Welch training and connected Viterbi decoding.

All probability work is in log space. Each state emits through a diagonal-
covariance Gaussian mixture; transitions allow self-loop and forward moves
only, with an exit transition from the final state. A one-state model doubles
as the background GMM.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from .kmeans import kmeans_fit

VAR_FLOOR = 1e-6
EM_TOL = 1e-4
EM_MAX_ITERS = 20
LOG_ZERO = -1e30


@dataclass
class DiagGmm:
    weights: np.ndarray  # (M,)
    means: np.ndarray  # (M, D)
    variances: np.ndarray  # (M, D), floored

    def component_log_prob(self, X: np.ndarray) -> np.ndarray:
        """(n, M) log w_m + log N(x | mu_m, var_m)."""
        X = np.atleast_2d(X)
        d = X.shape[1]
        log_norm = -0.5 * (d * np.log(2.0 * np.pi) + np.sum(np.log(self.variances), axis=1))
        diff = X[:, None, :] - self.means[None, :, :]
        maha = np.sum(diff * diff / self.variances[None, :, :], axis=2)
        return np.log(np.maximum(self.weights, 1e-300))[None, :] + log_norm[None, :] - 0.5 * maha

    def log_prob(self, X: np.ndarray) -> np.ndarray:
        comp = self.component_log_prob(X)
        m = comp.max(axis=1)
        return m + np.log(np.sum(np.exp(comp - m[:, None]), axis=1))


@dataclass
class HmmModel:
    """states x [self, next, exit] transition probabilities plus per-state GMMs."""

    gmms: list[DiagGmm]
    trans: np.ndarray  # (S, 3) rows sum to 1; next=0 at final state, exit=0 elsewhere
    ll_history: list[float] = field(default_factory=list)

    @property
    def n_states(self) -> int:
        return len(self.gmms)

    def state_log_prob(self, X: np.ndarray) -> np.ndarray:
        """(T, S) per-frame per-state emission log-likelihood."""
        return np.stack([g.log_prob(X) for g in self.gmms], axis=1)

    def sequence_log_likelihood(self, X: np.ndarray) -> float:
        return _forward_ll(self.state_log_prob(X), np.log(np.maximum(self.trans, 1e-300)))


def _fit_gmm(X: np.ndarray, m: int, seed: int) -> DiagGmm:
    """k-means initialized mixture; component count clamps to the sample count."""
    m_eff = max(1, min(m, len(X)))
    cb = kmeans_fit(X, m_eff, seed)
    idx = cb.assign(X)
    weights = np.empty(m_eff)
    variances = np.empty((m_eff, X.shape[1]))
    for j in range(m_eff):
        members = X[idx == j]
        if len(members) == 0:
            members = X
        weights[j] = max(len(members), 1)
        variances[j] = np.maximum(members.var(axis=0), VAR_FLOOR)
    weights /= weights.sum()
    return DiagGmm(weights=weights, means=cb.centroids.copy(), variances=variances)


def _forward_ll(log_b: np.ndarray, log_trans: np.ndarray) -> float:
    t_len, s = log_b.shape
    alpha = np.full(s, LOG_ZERO)
    alpha[0] = log_b[0, 0]  # left-to-right entry at state 0
    for t in range(1, t_len):
        stay = alpha + log_trans[:, 0]
        move = np.full(s, LOG_ZERO)
        move[1:] = alpha[:-1] + log_trans[:-1, 1]
        alpha = np.logaddexp(stay, move) + log_b[t]
    return float(alpha[-1] + log_trans[-1, 2])


def _forward_backward(log_b: np.ndarray, log_trans: np.ndarray):
    """Returns (log_alpha, log_beta, sequence_ll) with the final-state exit."""
    t_len, s = log_b.shape
    log_alpha = np.full((t_len, s), LOG_ZERO)
    log_alpha[0, 0] = log_b[0, 0]
    for t in range(1, t_len):
        stay = log_alpha[t - 1] + log_trans[:, 0]
        move = np.full(s, LOG_ZERO)
        move[1:] = log_alpha[t - 1, :-1] + log_trans[:-1, 1]
        log_alpha[t] = np.logaddexp(stay, move) + log_b[t]
    ll = float(log_alpha[-1, -1] + log_trans[-1, 2])
    log_beta = np.full((t_len, s), LOG_ZERO)
    log_beta[-1, -1] = log_trans[-1, 2]
    for t in range(t_len - 2, -1, -1):
        stay = log_trans[:, 0] + log_b[t + 1] + log_beta[t + 1]
        move = np.full(s, LOG_ZERO)
        move[:-1] = log_trans[:-1, 1] + log_b[t + 1, 1:] + log_beta[t + 1, 1:]
        log_beta[t] = np.logaddexp(stay, move)
    return log_alpha, log_beta, ll


def hmm_train(
    sequences: list[np.ndarray], n_states: int, n_mixtures: int, seed: int
) -> HmmModel:
    """Baum-Welch on isolated sequences.

    Initialization segments each sequence uniformly into `n_states` parts and
    fits a per-state mixture by k-means. EM stops when the total log-likelihood
    improves by less than 1e-4 or after 20 iterations; the per-iteration totals
    are kept on the model for monotonicity checks.
    """
    sequences = [np.atleast_2d(np.asarray(x, dtype=np.float64)) for x in sequences]
    if not sequences:
        raise DataError("no training sequences")
    for x in sequences:
        if len(x) < n_states:
            raise DataError(f"sequence of {len(x)} frames shorter than {n_states} states")

    state_pools: list[list[np.ndarray]] = [[] for _ in range(n_states)]
    for x in sequences:
        for s, chunk in enumerate(np.array_split(x, n_states)):
            state_pools[s].append(chunk)
    gmms = [
        _fit_gmm(np.vstack(pool), n_mixtures, seed + s) for s, pool in enumerate(state_pools)
    ]
    trans = np.zeros((n_states, 3))
    trans[:, 0] = 0.5
    trans[:-1, 1] = 0.5
    trans[-1, 2] = 0.5

    model = HmmModel(gmms=gmms, trans=trans)
    prev_ll = -np.inf
    for _ in range(EM_MAX_ITERS):
        total_ll, model = _baum_welch_step(model, sequences)
        model.ll_history.append(total_ll)
        if total_ll - prev_ll < EM_TOL:
            break
        prev_ll = total_ll
    return model


def _baum_welch_step(model: HmmModel, sequences: list[np.ndarray]):
    s = model.n_states
    d = sequences[0].shape[1]
    m_counts = [len(g.weights) for g in model.gmms]
    log_trans = np.log(np.maximum(model.trans, 1e-300))

    occ = np.zeros(s)  # state occupancy over all frames
    trans_num = np.zeros((s, 3))
    comp_w = [np.zeros(m) for m in m_counts]
    comp_mu = [np.zeros((m, d)) for m in m_counts]
    comp_sq = [np.zeros((m, d)) for m in m_counts]
    total_ll = 0.0

    for x in sequences:
        comp_lp = [g.component_log_prob(x) for g in model.gmms]  # (T, M_s) each
        log_b = np.stack(
            [_logsumexp_rows(cl) for cl in comp_lp], axis=1
        )  # (T, S)
        log_alpha, log_beta, ll = _forward_backward(log_b, log_trans)
        total_ll += ll
        log_gamma = log_alpha + log_beta - ll
        gamma = np.exp(np.clip(log_gamma, -700, 50))
        t_len = len(x)

        occ += gamma.sum(axis=0)
        # transition posteriors: self and forward for t < T-1, exit at T-1
        if t_len > 1:
            xi_self = np.exp(
                np.clip(
                    log_alpha[:-1] + log_trans[None, :, 0] + log_b[1:] + log_beta[1:] - ll,
                    -700,
                    50,
                )
            )
            trans_num[:, 0] += xi_self.sum(axis=0)
            xi_next = np.exp(
                np.clip(
                    log_alpha[:-1, :-1]
                    + log_trans[None, :-1, 1]
                    + log_b[1:, 1:]
                    + log_beta[1:, 1:]
                    - ll,
                    -700,
                    50,
                )
            )
            trans_num[:-1, 1] += xi_next.sum(axis=0)
        trans_num[-1, 2] += gamma[-1, -1]

        for st in range(s):
            # within-state component posterior, scaled by state occupancy
            resp = np.exp(np.clip(comp_lp[st] - log_b[:, st][:, None], -700, 50))
            resp *= gamma[:, st][:, None]
            comp_w[st] += resp.sum(axis=0)
            comp_mu[st] += resp.T @ x
            comp_sq[st] += resp.T @ (x * x)

    new_gmms = []
    for st in range(s):
        w = comp_w[st]
        safe = np.maximum(w, 1e-300)
        mu = comp_mu[st] / safe[:, None]
        var = np.maximum(comp_sq[st] / safe[:, None] - mu * mu, VAR_FLOOR)
        weights = w / max(w.sum(), 1e-300)
        new_gmms.append(DiagGmm(weights=weights, means=mu, variances=var))
    new_trans = np.zeros_like(model.trans)
    for st in range(s):
        denom = trans_num[st].sum()
        new_trans[st] = trans_num[st] / denom if denom > 0 else model.trans[st]
    out = HmmModel(gmms=new_gmms, trans=new_trans, ll_history=model.ll_history)
    return total_ll, out


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    return m + np.log(np.sum(np.exp(a - m[:, None]), axis=1))


def viterbi_path(log_b: np.ndarray, log_trans_dense: np.ndarray, log_pi: np.ndarray):
    """Max-probability state path through a dense log transition matrix.

    Returns (path indices (T,), path log score). Invariant to any constant
    added to all of log_b.
    """
    t_len, n = log_b.shape
    if t_len == 0:
        raise DataError("empty frame sequence")
    score = log_pi + log_b[0]
    back = np.zeros((t_len, n), dtype=np.int64)
    for t in range(1, t_len):
        cand = score[:, None] + log_trans_dense
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(n)] + log_b[t]
    path = np.empty(t_len, dtype=np.int64)
    path[-1] = int(np.argmax(score))
    for t in range(t_len - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(np.max(score))


def build_decoding_graph(models: dict[str, HmmModel]):
    """Dense (log_pi, log_trans, owners, state_offsets) for connected decoding.

    Models are looped: exit mass from each final state spreads uniformly over
    all model entry states; the initial distribution is uniform over entries.
    Model order follows the dict's insertion order.
    """
    labels = list(models.keys())
    n_models = len(labels)
    offsets: dict[str, int] = {}
    total = 0
    for lab in labels:
        offsets[lab] = total
        total += models[lab].n_states
    log_trans = np.full((total, total), LOG_ZERO)
    log_pi = np.full(total, LOG_ZERO)
    entry_ids = [offsets[lab] for lab in labels]
    owners = np.empty(total, dtype=np.int64)
    for mi, lab in enumerate(labels):
        model = models[lab]
        base = offsets[lab]
        s = model.n_states
        owners[base : base + s] = mi
        log_pi[base] = -np.log(n_models)
        with np.errstate(divide="ignore"):
            lt = np.log(np.maximum(model.trans, 0.0))
        for st in range(s):
            g = base + st
            if model.trans[st, 0] > 0:
                log_trans[g, g] = lt[st, 0]
            if st + 1 < s and model.trans[st, 1] > 0:
                log_trans[g, g + 1] = lt[st, 1]
        exit_lp = lt[s - 1, 2] - np.log(n_models)
        if model.trans[s - 1, 2] > 0:
            for e in entry_ids:
                g = base + s - 1
                log_trans[g, e] = np.logaddexp(log_trans[g, e], exit_lp)
    return log_pi, log_trans, owners, labels


def connected_decode(
    models: dict[str, HmmModel],
    background: HmmModel,
    frames: np.ndarray,
    background_label: str = "__background__",
):
    """Best path over all models looped together.

    Returns (path, owners, labels, log_b): global state path per frame, each
    global state's model index, model labels in graph order (background
    first, then event labels sorted), and the per-frame emission matrix.
    """
    if len(models) < 1:
        raise DataError("need at least one event model")
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    all_models: dict[str, HmmModel] = {background_label: background}
    for lab in sorted(models.keys()):
        all_models[lab] = models[lab]
    log_pi, log_trans, owners, labels = build_decoding_graph(all_models)
    log_b = np.concatenate(
        [all_models[lab].state_log_prob(frames) for lab in labels], axis=1
    )
    path, _ = viterbi_path(log_b, log_trans, log_pi)
    return path, owners, labels, log_b


def path_segments(
    path: np.ndarray,
    owners: np.ndarray,
    labels: list[str],
    hop: float,
    frame_len: float,
    background_label: str = "__background__",
) -> list[tuple[int, int, str]]:
    """Maximal same-model frame runs as (first_frame, end_frame, label), background omitted."""
    segments = []
    model_seq = owners[path]
    start = 0
    for t in range(1, len(path) + 1):
        if t == len(path) or model_seq[t] != model_seq[start]:
            lab = labels[model_seq[start]]
            if lab != background_label:
                segments.append((start, t, lab))
            start = t
    return segments


def viterbi_decode(
    models: dict[str, HmmModel],
    background: HmmModel,
    frames: np.ndarray,
    hop: float,
    frame_len: float,
    background_label: str = "__background__",
) -> list[tuple[float, float, str]]:
    """Connected decoding of a frame sequence over event models plus background.

    Returns time-ordered (onset, offset, label) segments of the best path,
    background segments omitted. Frame t owns [t*hop, (t+1)*hop) seconds so
    segments partition the stream; the signal's final frame extends to its
    frame end.
    """
    path, owners, labels, _ = connected_decode(models, background, frames, background_label)
    n = len(path)
    out: list[tuple[float, float, str]] = []
    for first, end, lab in path_segments(path, owners, labels, hop, frame_len, background_label):
        offset = (end - 1) * hop + frame_len if end == n else end * hop
        out.append((first * hop, offset, lab))
    return out
