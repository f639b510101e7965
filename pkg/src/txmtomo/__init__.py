"""Limited-angle parallel-beam TXM tomography toolkit.

Simulates parallel-beam acquisition of synthetic ellipsoid phantoms with
Poisson counting noise, denoises log projections with penalized weighted
least squares, reconstructs with Ram-Lak filtered back-projection, and
trains a modified U-Net to predict and subtract the limited-angle artifact
image.
"""

__version__ = "0.1.0"

from . import fbp, metrics, noise, phantom, projection, pwls, unet  # noqa: F401
