"""Ptychographic phase retrieval with iterative projections and a learned residual refiner."""

from ._kernels import backend, set_backend
from .forward import Geometry, Probe, ScanGrid, make_gaussian_probe, make_scan_grid, pty_istft, pty_stft, record_amplitudes
from .grid import fft2_segments, ifft2_segments, pad_object
from .metrics import crop_to_roi, e0, psnr
from .projections import DmConfig, ProjectionConfig, ap_step, dm_step, proj_amplitude, proj_consistency, random_phase_init
from .reconstruct import Trajectory, run_reconstruction

__version__ = "0.1.0"
