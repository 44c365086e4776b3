"""Point cloud denoising by alternating iPSR and lambda-projection."""

from ._altrec import (
    AltrecError,
    chamfer_l1,
    denoise,
    depth_schedule,
    f_score,
    ipsr,
    lambda_coefficient,
    mads,
    reconstruct,
    rmsd,
    set_threads,
    thread_count,
)

__all__ = [
    "AltrecError",
    "chamfer_l1",
    "denoise",
    "depth_schedule",
    "f_score",
    "ipsr",
    "lambda_coefficient",
    "mads",
    "reconstruct",
    "rmsd",
    "set_threads",
    "thread_count",
]
