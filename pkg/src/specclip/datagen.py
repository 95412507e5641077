"""Seeded synthetic systems and trajectory datasets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DimensionMismatch
from .linalg import as_real_matrix
from .sysid import TrajectoryDataset

KINDS = ("linear", "controlled", "polynomial", "corrupted")

# Failed demonstrations: the tail drifts away from the clean trajectory as
# FAILURE_SCALE * FAILURE_GROWTH**k along a random unit direction.
FAILURE_SCALE = 0.1
FAILURE_GROWTH = 1.25


@dataclass(frozen=True)
class GenSpec:
    kind: str = "linear"
    n: int = 2
    m: int = 0
    rho_target: float = 0.9
    n_traj: int = 5
    T: int = 20
    noise_sigma: float = 0.0
    truncate_to: Optional[int] = None
    failure_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.T < 2:
            raise ValueError(f"T must be at least 2, got {self.T}")
        if self.n < 1 or self.n_traj < 1:
            raise ValueError("n and n_traj must be positive")
        if self.rho_target <= 0:
            raise ValueError("rho_target must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0.0 <= self.failure_fraction < 1.0:
            raise ValueError("failure_fraction must lie in [0, 1)")
        if self.failure_fraction > 0 and self.kind != "corrupted":
            raise ValueError("failure_fraction is only valid with kind='corrupted'")
        if self.kind == "controlled" and self.m < 1:
            raise ValueError("controlled datasets need m >= 1")
        if self.truncate_to is not None and not 2 <= self.truncate_to <= self.T:
            raise ValueError(f"truncate_to must lie in [2, T={self.T}]")


def _random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def gen_stable_system(n: int, rho_target: float, seed: int = 0) -> np.ndarray:
    """Random real ``M D M^-1`` with spectral radius exactly ``rho_target``.

    ``M`` has singular values in ``[1, 10]`` (so ``cond(M) <= 10``); ``D`` is
    block diagonal with real eigenvalues and 2x2 rotation-scaling blocks whose
    magnitudes lie in ``[0.2 rho, rho]``.  The first block has magnitude ``rho``.
    """
    if rho_target <= 0:
        raise ValueError("rho_target must be positive")
    rng = np.random.default_rng(seed)
    D = np.zeros((n, n))
    i = 0
    while i < n:
        mag = rho_target if i == 0 else rng.uniform(0.2 * rho_target, rho_target)
        if i + 1 < n and rng.random() < 0.5:
            theta = rng.uniform(0.05, np.pi - 0.05)
            c, s = mag * np.cos(theta), mag * np.sin(theta)
            D[i:i + 2, i:i + 2] = [[c, -s], [s, c]]
            i += 2
        else:
            D[i, i] = mag * rng.choice([-1.0, 1.0])
            i += 1
    M = _random_orthogonal(rng, n) @ np.diag(rng.uniform(1.0, 10.0, n)) @ _random_orthogonal(rng, n)
    return np.linalg.solve(M.T, (M @ D).T).T


def _simulate(rng, A, B, spec: GenSpec):
    n = A.shape[0]
    states, inputs = [], []
    for _ in range(spec.n_traj):
        x = np.empty((spec.T, n))
        x[0] = rng.standard_normal(n)
        u = rng.standard_normal((spec.T - 1, B.shape[1])) if B is not None else None
        for t in range(spec.T - 1):
            step = A @ x[t]
            if B is not None:
                step = step + B @ u[t]
            x[t + 1] = step + spec.noise_sigma * rng.standard_normal(n)
        states.append(x)
        inputs.append(u)
    return states, (inputs if B is not None else None)


def _corrupt(states, inputs, spec: GenSpec):
    """Truncate the failed trajectories and make their tails diverge."""
    rng = np.random.default_rng([spec.seed, 1])
    n_failed = int(round(spec.failure_fraction * spec.n_traj))
    failed = rng.choice(spec.n_traj, size=n_failed, replace=False) if n_failed else []
    states = list(states)
    inputs = None if inputs is None else list(inputs)
    for j in sorted(failed):
        length = spec.truncate_to or spec.T
        x = states[j][:length].copy()
        onset = length // 2
        direction = rng.standard_normal(x.shape[1])
        direction /= np.linalg.norm(direction)
        k = np.arange(length - onset)
        x[onset:] += FAILURE_SCALE * FAILURE_GROWTH ** k[:, None] * direction
        states[j] = x
        if inputs is not None:
            inputs[j] = inputs[j][:length - 1]
    return states, inputs, sorted(int(j) for j in failed)


def gen_trajectories(system: Union[np.ndarray, Tuple[np.ndarray, np.ndarray]], spec: GenSpec) -> TrajectoryDataset:
    """Simulate ``spec.n_traj`` trajectories of ``x_{t+1} = A x_t (+ B u_t) + noise``.

    Initial states and inputs are standard normal.  ``truncate_to`` shortens
    every trajectory, except for ``kind="corrupted"`` where it shortens only the
    failed ones.
    """
    if isinstance(system, tuple):
        A, B = as_real_matrix(system[0], square=True), as_real_matrix(system[1], name="B")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatch("B row count must match A")
    else:
        A, B = as_real_matrix(system, square=True), None
    if A.shape[0] != spec.n:
        raise DimensionMismatch(f"system has dimension {A.shape[0]}, spec says n={spec.n}")
    if spec.kind == "controlled" and B is None:
        raise DimensionMismatch("controlled generation needs (A, B)")
    if B is not None and B.shape[1] != spec.m:
        raise DimensionMismatch(f"B has {B.shape[1]} columns, spec says m={spec.m}")

    rng = np.random.default_rng(spec.seed)
    states, inputs = _simulate(rng, A, B, spec)
    if spec.kind == "corrupted":
        states, inputs, _ = _corrupt(states, inputs, spec)
    elif spec.truncate_to is not None:
        states = [s[:spec.truncate_to] for s in states]
        if inputs is not None:
            inputs = [u[:spec.truncate_to - 1] for u in inputs]
    return TrajectoryDataset(tuple(states), None if inputs is None else tuple(inputs))


def polynomial_step(x, rate: float = 0.9):
    """``x1' = rate x1``, ``x2' = 0.8 x2 + 0.1 x1**2``."""
    x = np.asarray(x, dtype=float)
    return np.stack([rate * x[..., 0], 0.8 * x[..., 1] + 0.1 * x[..., 0] ** 2], axis=-1)


def polynomial_exact_matrix(rate: float = 0.9) -> np.ndarray:
    """Exact lifted dynamics on ``[x1^2, x1 x2, x2^2, x1, x2]`` where they close.

    The rows for ``x1^2``, ``x1`` and ``x2`` are exact.  The ``x1 x2`` and
    ``x2^2`` rows pick up cubic and quartic terms and have no exact linear
    counterpart; they are filled with their quadratic-order part
    (``0.8 rate`` and ``0.64``) for reference only.
    """
    K = np.zeros((5, 5))
    K[0, 0] = rate ** 2
    K[1, 1] = 0.8 * rate
    K[2, 2] = 0.64
    K[3, 3] = rate
    K[4, 4] = 0.8
    K[4, 0] = 0.1
    return K


#: Lifted coordinates whose dynamics are exactly linear under the degree-2 lifting.
POLYNOMIAL_CLOSED_ROWS = (0, 3, 4)


def gen_polynomial_benchmark(seed: int = 0, n_traj: int = 10, T: int = 30,
                             rate: float = 0.9) -> Tuple[TrajectoryDataset, np.ndarray]:
    """Trajectories of the two-state polynomial system plus its exact lifted matrix.

    Initial states are uniform on ``[-1, 1]^2``.  ``rate`` is the ``x1``
    multiplier; ``rate=1`` gives a marginally stable variant.
    """
    if T < 2:
        raise ValueError("T must be at least 2")
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(n_traj):
        x = np.empty((T, 2))
        x[0] = rng.uniform(-1.0, 1.0, 2)
        for t in range(T - 1):
            x[t + 1] = polynomial_step(x[t], rate)
        states.append(x)
    return TrajectoryDataset(tuple(states)), polynomial_exact_matrix(rate)


def generate(spec: GenSpec, system=None):
    """Dataset plus ground truth for any ``GenSpec`` kind.

    Returns ``(dataset, truth)`` where ``truth`` is ``A``, ``(A, B)`` or, for the
    polynomial kind, the exact lifted matrix.
    """
    if spec.kind == "polynomial":
        return gen_polynomial_benchmark(spec.seed, spec.n_traj, spec.T)
    if system is None:
        A = gen_stable_system(spec.n, spec.rho_target, spec.seed)
        if spec.kind == "controlled":
            B = np.random.default_rng([spec.seed, 2]).standard_normal((spec.n, spec.m))
            system = (A, B)
        else:
            system = A
    return gen_trajectories(system, spec), system
