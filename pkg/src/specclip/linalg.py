"""Dense eigendecomposition utilities for real square matrices.

Eigenvalues are returned in a deterministic order (magnitude, then real part,
then imaginary part, all descending) with complex-conjugate pairs stored
adjacently, positive-imaginary member first.  Eigenvectors have unit 2-norm and
their first significant component is rotated onto the positive real axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EigFailure, NonRealResult

#: ``cond(modal)`` above this marks a matrix as numerically defective.
DEFECTIVE_COND = 1e12
#: Relative Frobenius size of the imaginary residue tolerated by ``reconstruct``.
IMAG_RESIDUE_TOL = 1e-6


def as_real_matrix(A, name="A", square=False) -> np.ndarray:
    """Validate and return ``A`` as a finite 2-D float64 array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DimensionMismatch(f"{name} has non-finite entries")
    return A


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues, modal matrix (eigenvectors as columns) and its condition number."""

    eigenvalues: np.ndarray
    modal: np.ndarray
    cond_modal: float

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(np.asarray(self.eigenvalues, dtype=complex)))
        object.__setattr__(self, "modal", _frozen(np.asarray(self.modal, dtype=complex)))

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def defective(self) -> bool:
        return not np.isfinite(self.cond_modal) or self.cond_modal > DEFECTIVE_COND

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    def with_eigenvalues(self, eigenvalues) -> "Spectrum":
        """Same modal matrix, new eigenvalues."""
        eigenvalues = np.asarray(eigenvalues, dtype=complex)
        if eigenvalues.shape != self.eigenvalues.shape:
            raise DimensionMismatch("eigenvalue count must match the modal matrix")
        return Spectrum(eigenvalues, self.modal, self.cond_modal)

    def conjugate_partner(self) -> np.ndarray:
        return conjugate_partners(self.eigenvalues)


def conjugate_partners(eigenvalues) -> np.ndarray:
    """Index of each eigenvalue's conjugate (itself when real).

    Assumes the adjacent-pair layout produced by ``eigendecompose``.
    """
    eigenvalues = np.asarray(eigenvalues)
    partner = np.arange(len(eigenvalues))
    i = 0
    while i < len(eigenvalues):
        if eigenvalues[i].imag != 0.0:
            partner[i], partner[i + 1] = i + 1, i
            i += 2
        else:
            i += 1
    return partner


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    mags = np.abs(v)
    lead = np.flatnonzero(mags > 1e-12 * mags.max())[0]
    return v * (np.conj(v[lead]) / mags[lead])


def eigendecompose(A) -> Spectrum:
    """Eigendecomposition ``A = M diag(lam) M^-1`` of a real square matrix.

    Raises
    ------
    EigFailure
        If LAPACK does not converge or an eigenpair misses the residual bound
        ``||A v - lam v|| <= 1e-8 * n * ||A||_F``.
    """
    A = as_real_matrix(A, square=True)
    n = A.shape[0]
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"eigensolver did not converge: {exc}") from exc

    # LAPACK returns exact conjugate pairs for real input, positive imag first.
    # Group them into units so sorting never splits a pair.
    units = []
    i = 0
    while i < n:
        if w[i].imag > 0.0:
            units.append((w[i], V[:, i], True))
            i += 2
        else:
            units.append((complex(w[i].real, 0.0), V[:, i].real.astype(complex), False))
            i += 1
    units.sort(key=lambda u: (abs(u[0]), u[0].real, u[0].imag), reverse=True)

    lam = np.empty(n, dtype=complex)
    M = np.empty((n, n), dtype=complex)
    k = 0
    for value, vec, paired in units:
        vec = _phase_normalize(vec)
        lam[k], M[:, k] = value, vec
        k += 1
        if paired:
            lam[k], M[:, k] = np.conj(value), np.conj(vec)
            k += 1

    tol = 1e-8 * n * max(np.linalg.norm(A), np.finfo(float).tiny)
    residuals = np.linalg.norm(A @ M - M * lam, axis=0)
    if np.any(residuals > tol):
        raise EigFailure(f"eigenpair residual {residuals.max():.3e} exceeds {tol:.3e}")

    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(M))
    if not np.isfinite(cond):
        cond = np.inf
    return Spectrum(lam, M, cond)


def reconstruct(spectrum: Spectrum) -> np.ndarray:
    """Real matrix ``Re(M diag(lam) M^-1)``.

    Raises ``NonRealResult`` when the discarded imaginary part is larger than
    ``1e-6 * (||result||_F + 1)``, which happens when conjugate pairs are broken.
    """
    if not np.isfinite(spectrum.cond_modal):
        raise EigFailure("modal matrix is singular; cannot reconstruct")
    M = spectrum.modal
    # M diag(lam) M^-1 = (M^-T (M diag(lam))^T)^T
    try:
        full = np.linalg.solve(M.T, (M * spectrum.eigenvalues).T).T
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"modal matrix is singular: {exc}") from exc
    result = full.real.copy()
    residue = np.linalg.norm(full.imag)
    if residue > IMAG_RESIDUE_TOL * (np.linalg.norm(result) + 1.0):
        raise NonRealResult(f"imaginary residue {residue:.3e} after reconstruction")
    return result


def spectral_radius(A) -> float:
    """Largest eigenvalue magnitude of ``A``."""
    A = as_real_matrix(A, square=True)
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"eigensolver did not converge: {exc}") from exc
    return float(np.max(np.abs(w)))


def is_schur_stable(A, margin: float = 0.0) -> bool:
    return spectral_radius(A) <= 1.0 - margin + 1e-10
