"""Cold-diffusion reconstruction of undersampled MRI scans.

Thin Python surface over the C++ core: synthetic phantoms, centered FFTs,
sampling-rate schedules, nested Cartesian mask families, the conditioned
reverse process, image metrics, and restorer training.
"""

from ._core import (
    Checkpoint,
    ColumnMask,
    Error,
    MaskFamily,
    Schedule,
    __version__,
    build_family,
    degrade,
    fft2_centered,
    gen_aligned_task_mask,
    gen_task_mask,
    ifft2_centered,
    load_checkpoint,
    load_image,
    make_phantom,
    measure,
    psnr,
    reconstruct,
    save_checkpoint,
    save_image,
    ssim,
    train,
    zero_fill,
)

__all__ = [
    "Checkpoint",
    "ColumnMask",
    "Error",
    "MaskFamily",
    "Schedule",
    "__version__",
    "build_family",
    "degrade",
    "fft2_centered",
    "gen_aligned_task_mask",
    "gen_task_mask",
    "ifft2_centered",
    "load_checkpoint",
    "load_image",
    "make_phantom",
    "measure",
    "psnr",
    "reconstruct",
    "save_checkpoint",
    "save_image",
    "ssim",
    "train",
    "zero_fill",
]
