"""Least-squares identification of discrete-time linear systems.

Trajectories are stored time-major (one row per time step).  The data matrices
follow the column convention ``X = [x_1, ..., x_{T-1}]``, ``Y = [x_2, ..., x_T]``
with trajectories stacked side by side in dataset order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionMismatch, EmptyData, RankTooLarge

#: Singular values below ``PINV_RCOND * sigma_max`` are treated as zero.
PINV_RCOND = 1e-12
#: Above this regressor dimension, solve by orthogonal factorization.
NORMAL_EQUATIONS_MAX_DIM = 512


@dataclass(frozen=True)
class TrajectoryDataset:
    """``N`` trajectories; ``states[j]`` is ``(T_j, n)``, ``inputs[j]`` is ``(T_j - 1, m)``."""

    states: Tuple[np.ndarray, ...]
    inputs: Optional[Tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        states = tuple(np.asarray(s, dtype=float) for s in self.states)
        states = tuple(s.reshape(-1, 1) if s.ndim == 1 else s for s in states)
        if not states:
            raise EmptyData("dataset has no trajectories")
        n = states[0].shape[1]
        for j, s in enumerate(states):
            if s.ndim != 2 or s.shape[1] != n:
                raise DimensionMismatch(f"trajectory {j}: states must have dimension {n}, got {s.shape}")
            if s.shape[0] < 2:
                raise DimensionMismatch(f"trajectory {j}: needs at least 2 states, got {s.shape[0]}")
            if not np.all(np.isfinite(s)):
                raise DimensionMismatch(f"trajectory {j}: non-finite state")
        object.__setattr__(self, "states", states)

        if self.inputs is None:
            return
        inputs = tuple(np.asarray(u, dtype=float) for u in self.inputs)
        if len(inputs) != len(states):
            raise DimensionMismatch(f"{len(inputs)} input sequences for {len(states)} trajectories")
        inputs = tuple(u.reshape(len(u), -1) if u.ndim == 1 else u for u in inputs)
        m = inputs[0].shape[1]
        if m == 0:
            raise DimensionMismatch("input dimension must be positive when inputs are given")
        for j, (s, u) in enumerate(zip(states, inputs)):
            if u.shape != (s.shape[0] - 1, m):
                raise DimensionMismatch(
                    f"trajectory {j}: inputs must be ({s.shape[0] - 1}, {m}), got {u.shape}")
            if not np.all(np.isfinite(u)):
                raise DimensionMismatch(f"trajectory {j}: non-finite input")
        object.__setattr__(self, "inputs", inputs)

    @property
    def state_dim(self) -> int:
        return self.states[0].shape[1]

    @property
    def input_dim(self) -> int:
        return 0 if self.inputs is None else self.inputs[0].shape[1]

    @property
    def n_traj(self) -> int:
        return len(self.states)

    @property
    def n_pairs(self) -> int:
        return sum(s.shape[0] - 1 for s in self.states)


@dataclass(frozen=True)
class DataMatrices:
    X: np.ndarray
    Y: np.ndarray
    U: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SvdBasis:
    mean: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def build_data_matrices(dataset: TrajectoryDataset) -> DataMatrices:
    """Stack successor pairs of every trajectory column-wise."""
    X = np.hstack([s[:-1].T for s in dataset.states])
    Y = np.hstack([s[1:].T for s in dataset.states])
    U = None
    if dataset.inputs is not None:
        U = np.hstack([u.T for u in dataset.inputs])
    return DataMatrices(X, Y, U)


def _solve_ls(Z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Minimum-norm ``Theta`` minimizing ``||Y - Theta Z||_F``."""
    if Z.shape[1] == 0:
        raise EmptyData("no (x_t, x_{t+1}) pairs")
    if Z.shape[0] <= NORMAL_EQUATIONS_MAX_DIM:
        gram = Z @ Z.T
        return (Y @ Z.T) @ np.linalg.pinv(gram, rcond=PINV_RCOND, hermitian=True)
    theta, *_ = np.linalg.lstsq(Z.T, Y.T, rcond=PINV_RCOND)
    return theta.T


def fit_ls(dataset: TrajectoryDataset) -> np.ndarray:
    """Unconstrained least-squares system matrix for ``x_{t+1} = A x_t``."""
    if dataset.n_pairs < 1:
        raise EmptyData("no (x_t, x_{t+1}) pairs")
    data = build_data_matrices(dataset)
    return _solve_ls(data.X, data.Y)


def fit_ls_controlled(dataset: TrajectoryDataset) -> Tuple[np.ndarray, np.ndarray]:
    """Joint least squares for ``x_{t+1} = A x_t + B u_t``.

    Solved as one regression on the stacked regressor ``[X; U]``; the learned
    block ``[A | B]`` is split afterwards.
    """
    if dataset.inputs is None:
        raise DimensionMismatch("controlled fit needs inputs")
    if dataset.n_pairs < 1:
        raise EmptyData("no (x_t, u_t, x_{t+1}) triples")
    data = build_data_matrices(dataset)
    n = dataset.state_dim
    theta = _solve_ls(np.vstack([data.X, data.U]), data.Y)
    return theta[:, :n], theta[:, n:]


def normal_equation_residual(theta, Z, Y) -> float:
    """``||theta Z Z^T - Y Z^T||_F / (||Y Z^T||_F + 1)``."""
    YZ = Y @ Z.T
    return float(np.linalg.norm(theta @ (Z @ Z.T) - YZ) / (np.linalg.norm(YZ) + 1.0))


def ls_objective(theta, Z, Y) -> float:
    return float(np.linalg.norm(Y - theta @ Z) ** 2)


def svd_reduce(frames, r: int) -> Tuple[SvdBasis, np.ndarray]:
    """Project a ``(T, d)`` frame sequence onto its top-``r`` centered principal subspace."""
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2 or frames.shape[0] < 2:
        raise DimensionMismatch(f"frames must be (T >= 2, d), got {frames.shape}")
    if not np.all(np.isfinite(frames)):
        raise DimensionMismatch("frames contain non-finite values")
    T, d = frames.shape
    if r < 1 or r > min(d, T):
        raise RankTooLarge(f"r={r} must lie in [1, min(d, T)={min(d, T)}]")
    mean = frames.mean(axis=0)
    U, s, _ = np.linalg.svd((frames - mean).T, full_matrices=False)
    basis = SvdBasis(mean, U[:, :r], s[:r])
    return basis, (frames - mean) @ basis.basis


def svd_lift(basis: SvdBasis, reduced) -> np.ndarray:
    reduced = np.atleast_2d(np.asarray(reduced, dtype=float))
    if reduced.shape[1] != basis.rank:
        raise DimensionMismatch(f"reduced vectors must have dimension {basis.rank}, got {reduced.shape[1]}")
    return basis.mean + reduced @ basis.basis.T

