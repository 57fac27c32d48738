"""Identification data and the FIR regression form y = G theta + e.

Each input channel contributes an n-by-p Toeplitz block ``G_k`` whose column
``j`` (0-based) holds the input delayed by ``j`` samples, with zeros before
the first sample (systems start at rest).  The stacked coefficient vector
``theta`` concatenates the per-channel blocks in channel order.

A :class:`RegressorBank` caches, once per run, everything the conditional
samplers touch repeatedly: the full cross-product grid ``{G_i' G_j}``, the
projections ``{G_k' y}`` and ``y'y``.  Every Gibbs update is then a small
dense-matrix operation that never rescans the n samples.  The Toeplitz blocks
themselves are only materialized when the total footprint is modest;
otherwise the cross-products are assembled from lagged inner products of the
raw input sequences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz


@dataclass(frozen=True)
class Dataset:
    """Output samples plus the m input sequences driving them."""

    y: np.ndarray        # (n,)
    inputs: np.ndarray   # (m, n)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        u = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        if y.ndim != 1 or y.size < 1:
            raise ValueError("output must be a nonempty 1-d array")
        if u.ndim != 2 or u.shape[0] < 1:
            raise ValueError("inputs must form a nonempty (m, n) array")
        if u.shape[1] != y.size:
            raise ValueError(
                f"inputs of length {y.size} expected, got {u.shape[1]}"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "inputs", u)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def m(self) -> int:
        return self.inputs.shape[0]


def save_dataset_csv(data: Dataset, path) -> None:
    """Write ``y,u1..um`` rows, one line per sample, 17 significant digits."""
    header = ",".join(["y"] + [f"u{k + 1}" for k in range(data.m)])
    table = np.column_stack([data.y, data.inputs.T])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header,
               comments="")


def load_dataset_csv(path) -> Dataset:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    if not names or names[0] != "y":
        raise ValueError(f"{path}: first column must be 'y', got {names[:1]}")
    expected = ["y"] + [f"u{k + 1}" for k in range(len(names) - 1)]
    if names != expected:
        raise ValueError(f"{path}: columns must be y,u1..um, got {names}")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(y=table[:, 0], inputs=table[:, 1:].T)


def theta_block(theta: np.ndarray, k: int, p: int) -> np.ndarray:
    """View of channel k's p coefficients inside the stacked layout."""
    return theta[k * p:(k + 1) * p]


def toeplitz_block(u: np.ndarray, p: int) -> np.ndarray:
    """The n-by-p regressor block for one input sequence."""
    first_row = np.zeros(p)
    first_row[0] = u[0]
    return toeplitz(u, first_row)


class RegressorBank:
    """Regressor blocks for one dataset with cached cross-products.

    Immutable after construction.  ``dense_budget`` caps the number of
    stored matrix entries (n * m * p) before block materialization is
    skipped and cross-products are computed by direct lagged correlation.
    """

    def __init__(self, data: Dataset, p: int, dense_budget: int = 50_000_000):
        if p < 1:
            raise ValueError(f"FIR order must be positive, got {p}")
        if p > data.n:
            warnings.warn(
                f"FIR order {p} exceeds the sample count {data.n}; "
                "the regression is rank deficient", stacklevel=2,
            )
        self.data = data
        self.p = int(p)
        self.n = data.n
        self.m = data.m
        self.yty = float(np.dot(data.y, data.y))

        if self.n * self.m * self.p <= dense_budget:
            self._blocks = [toeplitz_block(u, self.p) for u in data.inputs]
            G = np.hstack(self._blocks)
            self.gtg = G.T @ G
            self.gty = G.T @ data.y
        else:
            self._blocks = None
            self.gtg = np.empty((self.m * self.p, self.m * self.p))
            for i in range(self.m):
                for j in range(i, self.m):
                    block = _lagged_gram(data.inputs[i], data.inputs[j], self.p)
                    self.gtg[i * self.p:(i + 1) * self.p,
                             j * self.p:(j + 1) * self.p] = block
                    if j > i:
                        self.gtg[j * self.p:(j + 1) * self.p,
                                 i * self.p:(i + 1) * self.p] = block.T
            self.gty = np.empty(self.m * self.p)
            for k in range(self.m):
                self.gty[k * self.p:(k + 1) * self.p] = _lagged_proj(
                    data.inputs[k], data.y, self.p)
        self.gtg.setflags(write=False)
        self.gty.setflags(write=False)

    def block(self, k: int) -> np.ndarray:
        """The Toeplitz block G_k (materialized on demand if not cached)."""
        if self._blocks is not None:
            return self._blocks[k]
        return toeplitz_block(self.data.inputs[k], self.p)

    def gram(self, i: int, j: int) -> np.ndarray:
        """Cached p-by-p cross-product G_i' G_j."""
        p = self.p
        return self.gtg[i * p:(i + 1) * p, j * p:(j + 1) * p]

    def xty(self, k: int) -> np.ndarray:
        """Cached projection G_k' y."""
        return self.gty[k * self.p:(k + 1) * self.p]

    def predict(self, theta: np.ndarray) -> np.ndarray:
        """G theta: summed truncated convolutions of inputs with coefficients."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.m * self.p,):
            raise ValueError(
                f"coefficient vector of length {self.m * self.p} expected, "
                f"got shape {theta.shape}"
            )
        out = np.zeros(self.n)
        for k in range(self.m):
            out += np.convolve(
                self.data.inputs[k], theta_block(theta, k, self.p))[:self.n]
        return out

    def residual_sumsq(self, theta: np.ndarray) -> float:
        """||y - G theta||^2 from the cached products (no data pass)."""
        val = (self.yty - 2.0 * float(self.gty @ theta)
               + float(theta @ (self.gtg @ theta)))
        return max(val, 0.0)

    def partial_projection(self, channels: tuple[int, ...],
                           theta: np.ndarray) -> np.ndarray:
        """Stacked G_k'(y - sum_{j not in channels} G_j theta_j) for k in channels."""
        p = self.p
        rows = np.concatenate([np.arange(k * p, (k + 1) * p) for k in channels])
        out = self.gty[rows] - self.gtg[rows] @ theta
        for pos, k in enumerate(channels):
            for qos, j in enumerate(channels):
                out[pos * p:(pos + 1) * p] += (
                    self.gram(k, j) @ theta_block(theta, j, p))
        return out


def _lagged_gram(ui: np.ndarray, uj: np.ndarray, p: int) -> np.ndarray:
    """G_i' G_j without materializing the blocks.

    Entry (a, b) is sum_t ui[t-a] uj[t-b] over the shared sample range, i.e.
    the lag-(b-a) correlation of the two sequences minus the products that a
    row offset of ``a`` pushes past the end of the record.
    """
    n = ui.size
    # full-record correlations R[tau] = sum_s ui[s] uj[s - tau]
    R = np.empty(2 * p - 1)
    for tau in range(p):
        R[tau + p - 1] = np.dot(ui[tau:], uj[:n - tau])
        if tau:
            R[p - 1 - tau] = np.dot(ui[:n - tau], uj[tau:])
    out = np.empty((p, p))
    for a in range(p):
        for b in range(p):
            tau = b - a
            val = R[tau + p - 1]
            if a:
                # products with row offset a that fall past the record end
                lo = n - a
                hi = n + min(tau, 0)
                if hi > lo:
                    val -= np.dot(ui[lo:hi], uj[lo - tau:hi - tau])
            out[a, b] = val
    return out


def _lagged_proj(u: np.ndarray, y: np.ndarray, p: int) -> np.ndarray:
    """G_k' y as lagged inner products of the input with the output."""
    n = u.size
    return np.array([np.dot(u[:n - a], y[a:]) for a in range(p)])


def build_regressors(data: Dataset, p: int,
                     dense_budget: int = 50_000_000) -> RegressorBank:
    """Assemble the regressor bank and its cached cross-products."""
    return RegressorBank(data, p, dense_budget=dense_budget)


def predict(bank: RegressorBank, theta: np.ndarray) -> np.ndarray:
    """Model output G theta for a stacked coefficient vector."""
    return bank.predict(theta)
