"""Hot inner loops, each with a numba and a numpy implementation.

The public names (``rasterize_faces``, ``warp_forward`` ...) are bound to
whichever backend :mod:`garmentflow._accel` selected; the ``_*_numba`` and
``_*_numpy`` variants stay importable for tests and benchmarks.
"""

from .correlation import correlate
from .diffusion import jacobi_fill
from .raster import rasterize_faces
from .warp import warp_flow_grad, warp_forward, warp_image_adjoint

__all__ = [
    "correlate",
    "jacobi_fill",
    "rasterize_faces",
    "warp_flow_grad",
    "warp_forward",
    "warp_image_adjoint",
]
