"""One-vs-one kernel SVM trained by sequential minimal optimization.

The dual solver follows the usual min form: minimize 1/2 a'Qa - e'a with
Q_ij = y_i y_j K_ij, box [0, C] and sum(a_i y_i) = 0, first-order working
pair selection, KKT gap tolerance 1e-3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from .kernels import KernelSpec

KKT_TOL = 1e-3


def smo_solve(
    K: np.ndarray, y: np.ndarray, c_reg: float, tol: float = KKT_TOL
) -> tuple[np.ndarray, float, float]:
    """Solve the binary SVM dual for kernel matrix K and labels y in {-1, +1}.

    Returns (alpha, bias, dual_objective) where the decision function is
    sum_i alpha_i y_i K(x_i, x) + bias and dual_objective is the maximized
    sum(alpha) - 1/2 a'Qa.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)  # G = Q a - e
    max_iters = max(10_000, 100 * n)
    neg_yg = -y * grad
    for _ in range(max_iters):
        up = ((y > 0) & (alpha < c_reg)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c_reg)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            break
        i = np.flatnonzero(up)[np.argmax(neg_yg[up])]
        j = np.flatnonzero(low)[np.argmin(neg_yg[low])]
        if neg_yg[i] - neg_yg[j] <= tol:
            break
        eta = max(Q[i, i] + Q[j, j] - 2.0 * y[i] * y[j] * Q[i, j], 1e-12)
        # two-variable update on (i, j), then clip to the box-constraint segment
        delta = (neg_yg[i] - neg_yg[j]) / eta
        ai_old, aj_old = alpha[i], alpha[j]
        ai = ai_old + y[i] * delta
        if y[i] == y[j]:
            s = ai_old + aj_old
            ai = min(max(ai, max(0.0, s - c_reg)), min(c_reg, s))
        else:
            d = ai_old - aj_old
            ai = min(max(ai, max(0.0, d)), min(c_reg, c_reg + d))
        aj = aj_old + y[i] * y[j] * (ai_old - ai)
        alpha[i], alpha[j] = ai, aj
        grad += Q[:, i] * (ai - ai_old) + Q[:, j] * (aj - aj_old)
        neg_yg = -y * grad
    free = (alpha > 1e-12) & (alpha < c_reg - 1e-12)
    if free.any():
        bias = float(np.mean(neg_yg[free]))
    else:
        up = ((y > 0) & (alpha < c_reg)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c_reg)) | ((y > 0) & (alpha > 0))
        hi = np.max(neg_yg[up]) if up.any() else 0.0
        lo = np.min(neg_yg[low]) if low.any() else 0.0
        bias = float(0.5 * (hi + lo))
    objective = float(0.5 * (alpha.sum() - alpha @ grad))
    return alpha, bias, objective


@dataclass
class PairMachine:
    pos: str
    neg: str
    sv_index: np.ndarray  # indices into the model's stored vector table
    coef: np.ndarray  # alpha_i * y_i at the support vectors
    bias: float


@dataclass
class SvmModel:
    """One binary machine per unordered class pair, voting at prediction time."""

    classes: list[str]
    kernel: KernelSpec
    vectors: object  # (n_sv, d) array, or list of per-channel arrays for 'combined'
    machines: list[PairMachine] = field(default_factory=list)

    def _gram_to_vectors(self, X) -> np.ndarray:
        return self.kernel.gram(X, self.vectors)

    def decision_values(self, X) -> np.ndarray:
        """(n, n_machines) decision values, positive favoring each machine's pos class."""
        g = self._gram_to_vectors(X)
        out = np.empty((g.shape[0], len(self.machines)))
        for m, mach in enumerate(self.machines):
            out[:, m] = g[:, mach.sv_index] @ mach.coef + mach.bias
        return out

    def predict(self, X) -> list[str]:
        """Pairwise voting; ties broken toward the larger summed decision margin."""
        dec = self.decision_values(X)
        cls_index = {c: k for k, c in enumerate(self.classes)}
        pairs = [(cls_index[m.pos], cls_index[m.neg]) for m in self.machines]
        winners = _vote_predict(dec, pairs, len(self.classes))
        return [self.classes[k] for k in winners]

    def binary_decision(self, X, positive: str | None = None) -> np.ndarray:
        """Decision values of a two-class model, positive favoring `positive`."""
        if len(self.machines) != 1:
            raise DataError("binary_decision needs a two-class model")
        dec = self.decision_values(X)[:, 0]
        if positive is not None and self.machines[0].pos != positive:
            if self.machines[0].neg != positive:
                raise DataError(f"unknown class {positive!r}")
            dec = -dec
        return dec


def stratified_folds(labels, n_folds: int, seed: int) -> list[np.ndarray]:
    """Deterministic stratified fold index sets (round-robin per shuffled class)."""
    labels = np.asarray([str(v) for v in labels])
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for k, i in enumerate(idx):
            folds[k % n_folds].append(int(i))
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def _rows(X, idx, combined: bool):
    return [ch[idx] for ch in X] if combined else X[idx]


def _vote_predict(dec: np.ndarray, pairs: list[tuple[int, int]], n_classes: int) -> np.ndarray:
    """Class index per row from pairwise decisions (ties to larger summed margin)."""
    n = dec.shape[0]
    votes = np.zeros((n, n_classes))
    margins = np.zeros((n, n_classes))
    for m, (p, q) in enumerate(pairs):
        pos_wins = dec[:, m] > 0
        votes[pos_wins, p] += 1
        votes[~pos_wins, q] += 1
        margins[:, p] += dec[:, m]
        margins[:, q] -= dec[:, m]
    top = votes.max(axis=1, keepdims=True)
    return np.argmax(np.where(votes == top, margins, -np.inf), axis=1)


def cv_accuracy_precomputed(
    K: np.ndarray, y, c_reg: float, folds: list[np.ndarray]
) -> float:
    """Cross-validation accuracy on a precomputed kernel matrix."""
    labels = np.asarray([str(v) for v in y])
    classes = sorted(set(labels.tolist()))
    cls_index = {c: k for k, c in enumerate(classes)}
    n = len(labels)
    correct = 0
    total = 0
    for fold in folds:
        if len(fold) == 0:
            continue
        train = np.setdiff1d(np.arange(n), fold)
        present = sorted(set(labels[train].tolist()))
        total += len(fold)
        if len(present) < 2:
            continue
        decs = []
        pairs = []
        for a_i in range(len(present)):
            for b_i in range(a_i + 1, len(present)):
                pos, neg = present[a_i], present[b_i]
                sub = train[(labels[train] == pos) | (labels[train] == neg)]
                yy = np.where(labels[sub] == pos, 1.0, -1.0)
                alpha, bias, _ = smo_solve(K[np.ix_(sub, sub)], yy, c_reg)
                sv = alpha > 1e-12
                decs.append(K[np.ix_(fold, sub[sv])] @ (alpha[sv] * yy[sv]) + bias)
                pairs.append((cls_index[pos], cls_index[neg]))
        pred = _vote_predict(np.stack(decs, axis=1), pairs, len(classes))
        correct += int(np.sum(np.array([classes[k] for k in pred]) == labels[fold]))
    return correct / total if total else 0.0


def cross_val_accuracy(X, y, kernel: KernelSpec, c_reg: float, folds: list[np.ndarray]) -> float:
    """Mean held-out accuracy over folds; folds with a single training class score 0."""
    labels = np.asarray([str(v) for v in y])
    combined = kernel.kind == "combined"
    n = len(labels)
    correct = 0
    total = 0
    for fold in folds:
        if len(fold) == 0:
            continue
        train = np.setdiff1d(np.arange(n), fold)
        if len(set(labels[train].tolist())) < 2:
            total += len(fold)
            continue
        model = svm_train(_rows(X, train, combined), labels[train], kernel, c_reg)
        pred = model.predict(_rows(X, fold, combined))
        correct += int(np.sum(np.asarray(pred) == labels[fold]))
        total += len(fold)
    return correct / total if total else 0.0


def svm_train(X, y, kernel: KernelSpec, c_reg: float, tol: float = KKT_TOL) -> SvmModel:
    """Train a one-vs-one SVM. X is a row matrix, or per-channel matrices for 'combined'."""
    labels = [str(v) for v in y]
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError(f"need at least 2 classes, got {classes}")
    combined = kernel.kind == "combined"
    if combined:
        X = [np.asarray(ch, dtype=np.float64) for ch in X]
        n = len(X[0])
    else:
        X = np.asarray(X, dtype=np.float64)
        n = len(X)
    if len(labels) != n:
        raise DataError("label count does not match sample count")
    gram = kernel.gram(X, X)
    y_arr = np.asarray(labels)

    machines: list[PairMachine] = []
    used: set[int] = set()
    raw: list[tuple[str, str, np.ndarray, np.ndarray, float]] = []
    for a_i in range(len(classes)):
        for b_i in range(a_i + 1, len(classes)):
            pos, neg = classes[a_i], classes[b_i]
            idx = np.flatnonzero((y_arr == pos) | (y_arr == neg))
            yy = np.where(y_arr[idx] == pos, 1.0, -1.0)
            alpha, bias, _ = smo_solve(gram[np.ix_(idx, idx)], yy, c_reg, tol)
            sv = alpha > 1e-12
            sv_global = idx[sv]
            used.update(sv_global.tolist())
            raw.append((pos, neg, sv_global, alpha[sv] * yy[sv], bias))

    keep = np.array(sorted(used), dtype=np.int64)
    remap = {g: k for k, g in enumerate(keep.tolist())}
    vectors = [ch[keep] for ch in X] if combined else X[keep]
    for pos, neg, sv_global, coef, bias in raw:
        machines.append(
            PairMachine(
                pos=pos,
                neg=neg,
                sv_index=np.array([remap[g] for g in sv_global.tolist()], dtype=np.int64),
                coef=coef,
                bias=bias,
            )
        )
    return SvmModel(classes=classes, kernel=kernel, vectors=vectors, machines=machines)
