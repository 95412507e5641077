"""Rollouts, error metrics, LQR synthesis and the clipping benchmark."""

from __future__ import annotations

import logging
import time
import tracemalloc
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .clip import clip_spectrum
from .errors import DimensionMismatch, RiccatiNoConverge, TooShort
from .linalg import as_real_matrix

log = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e12
MOVING_THRESHOLD = 9.0


@dataclass(frozen=True)
class RolloutResult:
    states: np.ndarray
    diverged_at: Optional[int]
    max_norm: float

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


@dataclass(frozen=True)
class ErrorCurve:
    per_step: np.ndarray
    summary_mean: float

    @classmethod
    def from_steps(cls, per_step) -> "ErrorCurve":
        per_step = np.asarray(per_step, dtype=float)
        return cls(per_step, float(per_step.mean()))


@dataclass(frozen=True)
class BenchRecord:
    n: int
    wall_time_seconds: float
    peak_extra_bytes: Optional[int] = None


def _as_vector(x, n, name="x0"):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (n,):
        raise DimensionMismatch(f"{name} must have dimension {n}, got {x.shape[0]}")
    return x


def _simulate(step, x0, horizon, bound):
    states = [x0]
    norm = float(np.linalg.norm(x0))
    max_norm = norm
    diverged_at = 0 if not norm <= bound else None
    x = x0
    for k in range(horizon):
        if diverged_at is not None:
            break
        x = step(k, x)
        states.append(x)
        norm = float(np.linalg.norm(x))
        max_norm = max(max_norm, norm) if np.isfinite(norm) else np.inf
        if not norm <= bound:
            diverged_at = k + 1
    return RolloutResult(np.array(states), diverged_at, max_norm)


def rollout(A, x0, horizon: int, bound: float = DIVERGENCE_BOUND) -> RolloutResult:
    """Iterate ``x_{k+1} = A x_k``, stopping at the first state whose norm exceeds ``bound``."""
    A = as_real_matrix(A, square=True)
    x0 = _as_vector(x0, A.shape[0])
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    return _simulate(lambda k, x: A @ x, x0, horizon, bound)


def rollout_controlled(A, B, x0, inputs, bound: float = DIVERGENCE_BOUND) -> RolloutResult:
    A = as_real_matrix(A, square=True)
    B = as_real_matrix(B, name="B")
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
    x0 = _as_vector(x0, A.shape[0])
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs.reshape(-1, B.shape[1])
    if inputs.ndim != 2 or inputs.shape[1] != B.shape[1] or len(inputs) < 1:
        raise DimensionMismatch(f"inputs must be (H >= 1, {B.shape[1]}), got {inputs.shape}")
    return _simulate(lambda k, x: A @ x + B @ inputs[k], x0, len(inputs), bound)


def reconstruction_error(predicted, truth, metric: str = "mae") -> ErrorCurve:
    """Per-step error averaged over coordinates.

    ``metric="mae"`` averages absolute differences, ``"mse"`` squared ones.
    """
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape or predicted.ndim < 1 or len(predicted) == 0:
        raise DimensionMismatch(f"shape mismatch: predicted {predicted.shape} vs truth {truth.shape}")
    diff = (predicted - truth).reshape(len(predicted), -1)
    if metric == "mae":
        per_step = np.abs(diff).mean(axis=1)
    elif metric == "mse":
        per_step = (diff ** 2).mean(axis=1)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return ErrorCurve.from_steps(per_step)


def mean_error_curve(curves: Sequence[ErrorCurve]) -> ErrorCurve:
    """Average several equal-length curves step by step."""
    lengths = {len(c.per_step) for c in curves}
    if len(lengths) != 1:
        raise DimensionMismatch(f"curves have different lengths {sorted(lengths)}")
    return ErrorCurve.from_steps(np.mean([c.per_step for c in curves], axis=0))


def is_moving(frames, threshold: float = MOVING_THRESHOLD) -> bool:
    """``||F_M - F_{M-2}||_1 > threshold`` for the last frame ``F_M``."""
    frames = np.asarray(frames, dtype=float)
    if frames.ndim < 1 or len(frames) < 3:
        raise TooShort(f"need at least 3 frames, got {len(frames)}")
    gap = np.abs(frames[-1] - frames[-3]).sum()
    return bool(gap > threshold)


def moving_ratio(sequences: Iterable, threshold: float = MOVING_THRESHOLD) -> float:
    """Fraction of sequences whose final frame is still moving."""
    flags = [is_moving(seq, threshold) for seq in sequences]
    if not flags:
        raise TooShort("no sequences given")
    return sum(flags) / len(flags)


def lqr_gain(A, B, Q, R, iters: int = 10000, tol: float = 1e-10) -> np.ndarray:
    """Infinite-horizon discrete LQR gain via the Riccati fixed-point iteration.

    Iterates ``P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA`` from ``P = Q`` until
    ``||P_next - P||_F <= tol * max(1, ||P_next||_F)`` and returns
    ``G = (R + B'PB)^-1 B'PA`` for the control law ``u = -G x``.
    """
    A = as_real_matrix(A, square=True)
    B = as_real_matrix(B, name="B")
    Q = as_real_matrix(Q, name="Q", square=True)
    R = as_real_matrix(R, name="R", square=True)
    n, m = B.shape
    if A.shape[0] != n or Q.shape[0] != n or R.shape[0] != m:
        raise DimensionMismatch(f"incompatible shapes A{A.shape} B{B.shape} Q{Q.shape} R{R.shape}")

    P = Q.copy()
    for it in range(iters):
        BtP = B.T @ P
        S = R + BtP @ B
        G = np.linalg.solve(S, BtP @ A)
        P_next = Q + A.T @ P @ A - (A.T @ P @ B) @ G
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            raise RiccatiNoConverge(f"Riccati iterate blew up after {it + 1} iterations")
        delta = np.linalg.norm(P_next - P)
        size = np.linalg.norm(P_next)
        if not (np.isfinite(delta) and np.isfinite(size)):
            raise RiccatiNoConverge(f"Riccati iterate blew up after {it + 1} iterations")
        P = P_next
        if delta <= tol * max(1.0, size):
            BtP = B.T @ P
            return np.linalg.solve(R + BtP @ B, BtP @ A)
    raise RiccatiNoConverge(f"no convergence in {iters} iterations (last step {delta:.3e})")


def figure_eight_reference(n: int, steps: int, dt: float = 0.05, scale: float = 1.0) -> np.ndarray:
    """``(sin t, sin 2t)`` in the first two coordinates, zeros elsewhere; ``(steps, n)``."""
    if n < 2:
        raise DimensionMismatch("figure-8 reference needs at least 2 state coordinates")
    t = dt * np.arange(steps)
    ref = np.zeros((steps, n))
    ref[:, 0] = scale * np.sin(t)
    ref[:, 1] = scale * np.sin(2 * t)
    return ref


def track_reference(A_true, B_true, A_model, B_model, reference, Q, R, x0=None,
                    metric: str = "mae", **lqr_kwargs) -> ErrorCurve:
    """Track ``reference`` on the true plant with an LQR gain designed on the model.

    ``u_t = -G (x_t - r_t)``; the error curve compares ``x_t`` with ``r_t``.
    """
    A_true = as_real_matrix(A_true, square=True)
    B_true = as_real_matrix(B_true, name="B_true")
    reference = np.asarray(reference, dtype=float)
    n = A_true.shape[0]
    if reference.ndim != 2 or reference.shape[1] != n:
        raise DimensionMismatch(f"reference must be (T, {n}), got {reference.shape}")
    G = lqr_gain(A_model, B_model, Q, R, **lqr_kwargs)
    x = np.zeros(n) if x0 is None else _as_vector(x0, n)
    states = np.empty_like(reference)
    for t in range(len(reference)):
        states[t] = x
        u = -G @ (x - reference[t])
        x = A_true @ x + B_true @ u
    return reconstruction_error(states, reference, metric)


def open_loop_tracking_error(A_true, reference, x0=None, metric: str = "mae") -> ErrorCurve:
    """Error of the uncontrolled plant against ``reference``; a yardstick for ``track_reference``."""
    A_true = as_real_matrix(A_true, square=True)
    reference = np.asarray(reference, dtype=float)
    n = A_true.shape[0]
    x = np.zeros(n) if x0 is None else _as_vector(x0, n)
    states = np.empty_like(reference)
    for t in range(len(reference)):
        states[t] = x
        x = A_true @ x
    return reconstruction_error(states, reference, metric)


def loglog_slope(dims, times) -> Optional[float]:
    if len(dims) < 2:
        return None
    slope, _ = np.polyfit(np.log(np.asarray(dims, float)), np.log(np.asarray(times, float)), 1)
    return float(slope)


def bench_matrix(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng([seed, n]).standard_normal((n, n))


def bench_clip(dims: Sequence[int], repeats: int = 3, seed: int = 0,
               measure_memory: bool = False) -> Tuple[List[BenchRecord], Optional[float]]:
    """Time ``clip_spectrum`` on seeded Gaussian matrices.

    Each dimension reports the fastest of ``repeats`` runs.  With
    ``measure_memory`` one extra untimed run is traced for peak allocation.
    Returns the records and the least-squares slope of log(time) vs log(n)
    (``None`` with fewer than two dimensions).
    """
    dims = [int(d) for d in dims]
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dims must be strictly ascending")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    records = []
    for n in dims:
        A = bench_matrix(n, seed)
        clip_spectrum(A)  # warm-up
        best = np.inf
        for _ in range(repeats):
            start = time.perf_counter()
            clip_spectrum(A)
            best = min(best, time.perf_counter() - start)
        peak = None
        if measure_memory:
            tracemalloc.start()
            clip_spectrum(A)
            _, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
        log.info("n=%d time=%.4gs", n, best)
        records.append(BenchRecord(n, max(best, 1e-9), peak))
    slope = loglog_slope([r.n for r in records], [r.wall_time_seconds for r in records])
    return records, slope


def format_bench(records: Sequence[BenchRecord], slope: Optional[float]) -> str:
    """``n,wall_time_seconds,slope_running`` lines followed by ``slope,<value>``."""
    lines = []
    for i, rec in enumerate(records):
        running = loglog_slope([r.n for r in records[:i + 1]], [r.wall_time_seconds for r in records[:i + 1]])
        lines.append(f"{rec.n},{rec.wall_time_seconds:.6e},{'' if running is None else f'{running:.4f}'}")
    lines.append(f"slope,{'' if slope is None else f'{slope:.4f}'}")
    return "\n".join(lines) + "\n"
