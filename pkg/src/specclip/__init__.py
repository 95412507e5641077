"""Stable linear dynamics from data by post-hoc spectral clipping."""

from .clip import ClipReport, LinearModel, clip_controlled, clip_model, clip_spectrum, perturb_to_diagonalizable, \
    scale_baseline
from .errors import *  # noqa: F401,F403
from .koopman import KoopmanModel, LiftingSpec, ModeSet, clip_koopman, fit_koopman, lift, mode_decompose, \
    predict_states, rollout_modes
from .linalg import Spectrum, eigendecompose, is_schur_stable, reconstruct, spectral_radius
from .sysid import TrajectoryDataset, build_data_matrices, fit_ls, fit_ls_controlled, svd_lift, svd_reduce

__version__ = "0.1.0"
