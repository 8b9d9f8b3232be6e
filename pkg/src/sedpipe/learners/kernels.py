"""Chi-square distance and the kernels used by the event classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHI2_EPS = 1e-12


def chi2_distance(u: np.ndarray, v: np.ndarray) -> float:
    """D(u, v) = 1/2 sum_i (u_i - v_i)^2 / (u_i + v_i + eps), for nonnegative u, v."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("chi-square distance requires nonnegative entries")
    return 0.5 * float(np.sum((u - v) ** 2 / (u + v + CHI2_EPS)))


def chi2_cross(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Pairwise chi-square distances, (n, m) for row sets U (n, d) and V (m, d)."""
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if np.any(U < 0) or np.any(V < 0):
        raise ValueError("chi-square distance requires nonnegative entries")
    out = np.empty((len(U), len(V)))
    # row chunks keep the (chunk, m, d) broadcast under ~13M floats
    chunk = max(1, int(13_000_000 / max(V.size, 1)))
    for i in range(0, len(U), chunk):
        diff = U[i : i + chunk, None, :] - V[None, :, :]
        summ = U[i : i + chunk, None, :] + V[None, :, :] + CHI2_EPS
        out[i : i + chunk] = 0.5 * np.sum(diff * diff / summ, axis=-1)
    return out


def mean_chi2(X: np.ndarray) -> float:
    """Mean chi-square distance over unordered training pairs (the kernel bandwidth A)."""
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n < 2:
        return 1.0
    d = chi2_cross(X, X)
    iu = np.triu_indices(n, k=1)
    return float(np.mean(d[iu]))


def rbf_gram(U: np.ndarray, V: np.ndarray, gamma: float) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    sq = (
        np.sum(U * U, axis=1)[:, None]
        + np.sum(V * V, axis=1)[None, :]
        - 2.0 * (U @ V.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def chi2_gram(U: np.ndarray, V: np.ndarray, a: float) -> np.ndarray:
    """exp(-D(u, v)/A); the single-channel form of the combined kernel."""
    if a <= 0:
        raise ValueError(f"kernel bandwidth must be positive, got {a}")
    return np.exp(-chi2_cross(U, V) / a)


def combined_gram(
    U_channels: list[np.ndarray], V_channels: list[np.ndarray], a_channels: list[float]
) -> np.ndarray:
    """exp(-sum_k D(u^k, v^k)/A^k) over per-channel descriptor pairs."""
    if any(a <= 0 for a in a_channels):
        raise ValueError(f"kernel bandwidths must be positive, got {a_channels}")
    total = None
    for U, V, a in zip(U_channels, V_channels, a_channels):
        d = chi2_cross(U, V) / a
        total = d if total is None else total + d
    return np.exp(-total)


def combined_kernel(
    e_i: tuple[np.ndarray, ...], e_j: tuple[np.ndarray, ...], a_channels: list[float]
) -> float:
    """Scalar combined kernel between two multi-channel descriptors."""
    if any(a <= 0 for a in a_channels):
        raise ValueError(f"kernel bandwidths must be positive, got {a_channels}")
    total = 0.0
    for u, v, a in zip(e_i, e_j, a_channels):
        total += chi2_distance(u, v) / a
    return float(np.exp(-total))


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its data-determined or tuned parameters.

    kind "rbf" takes gamma; "chi2" and "combined" take per-channel bandwidths
    (each the mean pairwise chi-square distance of that training channel).
    """

    kind: str
    gamma: float | None = None
    bandwidths: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind == "rbf":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("rbf kernel needs gamma > 0")
        elif self.kind in ("chi2", "combined"):
            if self.bandwidths is None or any(x <= 0 for x in self.bandwidths):
                raise ValueError(f"{self.kind} kernel needs positive channel means")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    def gram(self, U, V) -> np.ndarray:
        """Kernel matrix between row sets (channel lists for 'combined')."""
        if self.kind == "rbf":
            return rbf_gram(U, V, self.gamma)
        if self.kind == "chi2":
            return chi2_gram(U, V, self.bandwidths[0])
        return combined_gram(U, V, list(self.bandwidths))
