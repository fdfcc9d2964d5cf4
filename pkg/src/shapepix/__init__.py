"""Recover binary shapes from a few pixel measurements by total-variation minimization."""
from .kernels import Kernel, KernelFamily, build_kernel
from .sampling import MeasurementSet, apply_adjoint, measure, sample_shape
from .shapes import Circle, Composite, HalfDisk, Polygon, rasterize, triangle_with_semicircle
from .solver import SolverConfig, SolverReport, reconstruct
from .cheeger import (check_reducible, find_lambda_star, reduced_domain, reduced_kernel,
                      reducibility_boundary_sweep, solve_cheeger)
from .verify import binarity_report, measurement_psnr, pixel_mismatch, psnr

__version__ = "0.1.0"

__all__ = [
    "Kernel", "KernelFamily", "build_kernel",
    "MeasurementSet", "apply_adjoint", "measure", "sample_shape",
    "Circle", "Composite", "HalfDisk", "Polygon", "rasterize", "triangle_with_semicircle",
    "SolverConfig", "SolverReport", "reconstruct",
    "check_reducible", "find_lambda_star", "reduced_domain", "reduced_kernel",
    "reducibility_boundary_sweep", "solve_cheeger",
    "binarity_report", "measurement_psnr", "pixel_mismatch", "psnr",
]
