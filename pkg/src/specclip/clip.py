"""Post-hoc stabilization of a learned system matrix by spectral clipping.

The matrix is eigendecomposed, every eigenvalue whose magnitude reaches the
clipping threshold is rescaled onto the circle of radius ``1 - eps`` (its
complex argument is kept), and the matrix is rebuilt from the *unchanged*
eigenvectors.  Eigenvalues below the threshold are not touched, so the
procedure only intervenes on the modes that would grow.

Two thresholds are available:

``"margin"`` (default)
    rescale every eigenvalue with ``|lam| >= 1 - eps``.  This guarantees
    ``spectral_radius(out) <= 1 - eps``.
``"unit"``
    rescale only eigenvalues with ``|lam| >= 1``.  Eigenvalues with
    ``1 - eps < |lam| < 1`` survive, so the output is stable but the radius
    can exceed ``1 - eps``.

For ``eps = 0`` both rules coincide.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionMismatch, PerturbationFailed
from .linalg import DEFECTIVE_COND, Spectrum, as_real_matrix, eigendecompose, reconstruct, spectral_radius

log = logging.getLogger(__name__)

#: Default 1-norm budget of the diagonalizing perturbation, relative to ``max(1, ||A||_1)``.
DEFAULT_GAMMA = 1e-10
MAX_DOUBLINGS = 20
RULES = ("margin", "unit")


@dataclass(frozen=True)
class ClipReport:
    """What ``clip_spectrum`` did.

    ``radius_before`` is the spectral radius of the matrix that was actually
    decomposed (after any diagonalizing perturbation); ``radius_after`` is the
    largest magnitude in the clipped eigenvalue list.
    """

    eps: float
    n_clipped: int
    radius_before: float
    radius_after: float
    perturbation_applied: float
    cond_modal: float
    rule: str = "margin"


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: Optional[np.ndarray] = None
    eps: float = 0.0
    clip_report: Optional[ClipReport] = None

    def __post_init__(self):
        A = as_real_matrix(self.A, square=True)
        object.__setattr__(self, "A", A)
        if self.B is not None:
            B = as_real_matrix(self.B, name="B")
            if B.shape[0] != A.shape[0]:
                raise DimensionMismatch(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
            object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return 0 if self.B is None else self.B.shape[1]


def _check_eps(eps):
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")


def clipped_eigenvalues(eigenvalues, eps: float = 0.0, rule: str = "margin"):
    """Apply the clipping rule to an eigenvalue array.

    Returns ``(new_eigenvalues, mask_of_clipped)``.
    """
    _check_eps(eps)
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}, got {rule!r}")
    lam = np.asarray(eigenvalues, dtype=complex)
    mags = np.abs(lam)
    threshold = 1.0 - eps if rule == "margin" else 1.0
    mask = mags >= threshold
    out = lam.copy()
    out[mask] = lam[mask] / mags[mask] * (1.0 - eps)
    return out, mask


def perturb_to_diagonalizable(A, gamma: float = DEFAULT_GAMMA, seed: int = 0) -> Tuple[np.ndarray, float]:
    """Nudge a defective matrix into a diagonalizable one.

    Adds ``E`` with ``||E||_1 = gamma * 2**k`` for the smallest ``k <= 20`` whose
    modal matrix has condition number at most ``1e12``.  ``E`` is a seeded
    uniform random matrix, rescaled per retry.  Diagonalizable input comes back
    unchanged with ``gamma_used = 0``.
    """
    A = as_real_matrix(A, square=True)
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not eigendecompose(A).defective:
        return A.copy(), 0.0
    rng = np.random.default_rng(seed)
    direction = rng.uniform(-1.0, 1.0, size=A.shape)
    direction /= np.linalg.norm(direction, 1)
    for k in range(MAX_DOUBLINGS + 1):
        budget = gamma * 2.0 ** k
        candidate = A + budget * direction
        if eigendecompose(candidate).cond_modal <= DEFECTIVE_COND:
            log.debug("diagonalized with gamma=%g after %d doublings", budget, k)
            return candidate, budget
    raise PerturbationFailed(
        f"still defective after {MAX_DOUBLINGS} doublings (gamma={gamma * 2.0 ** MAX_DOUBLINGS:g})")


def decompose_diagonalizable(A, gamma=None, seed=0) -> Tuple[Spectrum, float]:
    """Eigendecompose ``A``, perturbing it first if it is numerically defective."""
    spectrum = eigendecompose(A)
    if not spectrum.defective:
        return spectrum, 0.0
    if gamma is None:
        gamma = DEFAULT_GAMMA * max(1.0, np.linalg.norm(A, 1))
    perturbed, gamma_used = perturb_to_diagonalizable(A, gamma, seed)
    return eigendecompose(perturbed), gamma_used


def clip_spectrum(A, eps: float = 0.0, *, rule: str = "margin", gamma: Optional[float] = None,
                  seed: int = 0) -> Tuple[np.ndarray, ClipReport]:
    """Spectrally clip ``A``.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Real system matrix, typically a least-squares estimate.
    eps : float
        Stability margin in ``[0, 1)``; clipped eigenvalues get magnitude ``1 - eps``.
    rule : {"margin", "unit"}
        Clipping threshold, see the module docstring.
    gamma, seed
        Perturbation budget and seed used only when ``A`` is numerically
        defective.  ``gamma`` defaults to ``1e-10 * max(1, ||A||_1)``.

    Returns
    -------
    A_clipped : ndarray
    report : ClipReport
    """
    A = as_real_matrix(A, square=True)
    _check_eps(eps)
    spectrum, gamma_used = decompose_diagonalizable(A, gamma, seed)
    new_lam, mask = clipped_eigenvalues(spectrum.eigenvalues, eps, rule)
    out = reconstruct(spectrum.with_eigenvalues(new_lam))
    report = ClipReport(
        eps=float(eps),
        n_clipped=int(mask.sum()),
        radius_before=float(spectrum.magnitudes.max()),
        radius_after=float(np.abs(new_lam).max()),
        perturbation_applied=float(gamma_used),
        cond_modal=float(spectrum.cond_modal),
        rule=rule,
    )
    return out, report


def clip_controlled(A, B, eps: float = 0.0, **kwargs) -> LinearModel:
    """Clip ``A`` and keep ``B`` as it is."""
    A = as_real_matrix(A, square=True)
    B = as_real_matrix(B, name="B")
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
    A_sc, report = clip_spectrum(A, eps, **kwargs)
    return LinearModel(A_sc, B.copy(), eps, report)


def clip_model(model: LinearModel, eps: float = 0.0, **kwargs) -> LinearModel:
    A_sc, report = clip_spectrum(model.A, eps, **kwargs)
    return replace(model, A=A_sc, eps=float(eps), clip_report=report)


def scale_baseline(A, eps: float = 0.0) -> np.ndarray:
    """Uniform shrinkage ``A (1 - eps) / max(1, rho(A))``, the cheap alternative to clipping."""
    A = as_real_matrix(A, square=True)
    _check_eps(eps)
    return A * (1.0 - eps) / max(1.0, spectral_radius(A))
