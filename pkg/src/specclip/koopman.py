"""State-inclusive polynomial lifting and Koopman-matrix learning.

A state ``xi`` is lifted to ``z = [monomials(xi); xi]`` where the monomials
cover total degrees ``2..d`` in graded-lexicographic order.  Because the raw
state sits in the last ``n`` coordinates, decoding is a plain slice.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from math import comb
from typing import Iterable, Optional, Tuple

import numpy as np

from .clip import ClipReport, decompose_diagonalizable, clip_spectrum
from .errors import DimensionMismatch, NonConjugateSubset, NonRealResult, NumericalOverflow
from .linalg import IMAG_RESIDUE_TOL, as_real_matrix, conjugate_partners
from .sysid import TrajectoryDataset, fit_ls

OVERFLOW_LIMIT = 1e300


@dataclass(frozen=True)
class LiftingSpec:
    n: int
    degree: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"state dimension must be positive, got {self.n}")
        if self.degree < 2:
            raise ValueError(f"degree must be at least 2, got {self.degree}")

    @property
    def monomials(self) -> Tuple[Tuple[int, ...], ...]:
        """Variable-index tuples, e.g. ``(0, 0)`` is ``x_0**2``; graded, then lexicographic."""
        return tuple(
            combo
            for deg in range(2, self.degree + 1)
            for combo in itertools.combinations_with_replacement(range(self.n), deg)
        )

    @property
    def n_monomials(self) -> int:
        return sum(comb(self.n + k - 1, k) for k in range(2, self.degree + 1))

    @property
    def lifted_dim(self) -> int:
        return self.n + self.n_monomials


@dataclass(frozen=True)
class KoopmanModel:
    K: np.ndarray
    spec: LiftingSpec
    eps: float = 0.0
    clip_report: Optional[ClipReport] = None

    def __post_init__(self):
        K = as_real_matrix(self.K, name="K", square=True)
        if K.shape[0] != self.spec.lifted_dim:
            raise DimensionMismatch(f"K must be {self.spec.lifted_dim}x{self.spec.lifted_dim}, got {K.shape}")
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return self.spec.n


@dataclass(frozen=True)
class ModeSet:
    """Koopman eigenvalues, modes ``v_i`` and adjoint vectors ``w_i``.

    Normalized so that ``<v_i, w_j> = delta_ij`` with ``<a, b> = sum(a * conj(b))``;
    the eigenfunctions are ``phi_i(z) = <z, w_i>``.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    adjoint_vectors: np.ndarray
    cond_modal: float
    perturbation_applied: float = 0.0

    def eigenfunctions(self, z) -> np.ndarray:
        """``phi_i(z)`` for every mode."""
        return self.adjoint_vectors.conj().T @ np.asarray(z, dtype=float)

    def conjugate_partner(self) -> np.ndarray:
        return conjugate_partners(self.eigenvalues)

    def unstable_indices(self, threshold: float = 1.0) -> np.ndarray:
        return np.flatnonzero(np.abs(self.eigenvalues) > threshold)


def lift(xi, spec: LiftingSpec) -> np.ndarray:
    """Lift one state ``(n,)`` or a batch ``(T, n)``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != spec.n:
        raise DimensionMismatch(f"state must have dimension {spec.n}, got {xi.shape[-1]}")
    feats = [np.prod(xi[..., list(combo)], axis=-1) for combo in spec.monomials]
    return np.concatenate([np.stack(feats, axis=-1), xi], axis=-1)


def fit_koopman(dataset: TrajectoryDataset, spec: LiftingSpec) -> KoopmanModel:
    if dataset.inputs is not None:
        raise DimensionMismatch("Koopman fitting expects an autonomous dataset")
    if dataset.state_dim != spec.n:
        raise DimensionMismatch(f"dataset state_dim {dataset.state_dim} != lifting n {spec.n}")
    lifted = TrajectoryDataset(tuple(lift(s, spec) for s in dataset.states))
    return KoopmanModel(fit_ls(lifted), spec)


def clip_koopman(model: KoopmanModel, eps: float = 0.0, **kwargs) -> KoopmanModel:
    K_sc, report = clip_spectrum(model.K, eps, **kwargs)
    return replace(model, K=K_sc, eps=float(eps), clip_report=report)


def predict_lifted(K, z0, horizon: int) -> np.ndarray:
    """``[z0, K z0, ..., K^H z0]`` by repeated multiplication; ``(H+1, dim)``."""
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    out = np.empty((horizon + 1, len(z0)))
    out[0] = z = np.asarray(z0, dtype=float)
    for k in range(1, horizon + 1):
        z = K @ z
        if not np.all(np.abs(z) <= OVERFLOW_LIMIT):
            raise NumericalOverflow(f"lifted prediction exceeded {OVERFLOW_LIMIT:g} at step {k}")
        out[k] = z
    return out


def predict_states(model: KoopmanModel, xi0, horizon: int) -> np.ndarray:
    """Open-loop state predictions ``(H+1, n)``; row 0 is ``xi0`` itself."""
    xi0 = np.asarray(xi0, dtype=float)
    z = predict_lifted(model.K, lift(xi0, model.spec), horizon)
    states = z[:, -model.n:]
    states[0] = xi0
    return states


def mode_decompose(model_or_matrix, *, gamma: Optional[float] = None, seed: int = 0) -> ModeSet:
    """Eigen-modes of ``K`` and the matching adjoint eigenvectors.

    A numerically defective ``K`` is perturbed first; the budget used is kept in
    ``ModeSet.perturbation_applied``.
    """
    K = model_or_matrix.K if isinstance(model_or_matrix, KoopmanModel) else model_or_matrix
    K = as_real_matrix(K, name="K", square=True)
    spectrum, gamma_used = decompose_diagonalizable(K, gamma, seed)
    # Rows of M^-1 are w_i^H, so K^H w_i = conj(lam_i) w_i and w_i^H v_j = delta_ij.
    W = np.linalg.inv(spectrum.modal).conj().T
    return ModeSet(np.array(spectrum.eigenvalues), np.array(spectrum.modal), W,
                   spectrum.cond_modal, gamma_used)


def rollout_modes(modes: ModeSet, subset: Iterable[int], z0, horizon: int) -> np.ndarray:
    """``Re(sum_{i in subset} lam_i^k phi_i(z0) v_i)`` for ``k = 0..H``.

    ``subset`` holds 0-based mode indices and must not split a conjugate pair.
    """
    idx = np.unique(np.asarray(list(subset), dtype=int))
    n_modes = len(modes.eigenvalues)
    if idx.size and (idx.min() < 0 or idx.max() >= n_modes):
        raise DimensionMismatch(f"mode indices must lie in [0, {n_modes})")
    partner = modes.conjugate_partner()
    missing = sorted(set(partner[idx].tolist()) - set(idx.tolist()))
    if missing:
        raise NonConjugateSubset(f"subset omits conjugate partners {missing}")
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")

    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (modes.modes.shape[0],):
        raise DimensionMismatch(f"z0 must have dimension {modes.modes.shape[0]}")
    lam = modes.eigenvalues[idx]
    coeffs = modes.eigenfunctions(z0)[idx]
    V = modes.modes[:, idx]
    k = np.arange(horizon + 1)[:, None]
    with np.errstate(over="ignore", invalid="ignore"):
        traj = (lam[None, :] ** k * coeffs[None, :]) @ V.T
    real = traj.real
    finite = np.isfinite(traj).all(axis=1)
    residue = np.linalg.norm(traj.imag[finite])
    if residue > IMAG_RESIDUE_TOL * (np.linalg.norm(real[finite]) + 1.0):
        raise NonRealResult(f"mode rollout has imaginary residue {residue:.3e}")
    return real
