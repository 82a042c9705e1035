"""Shared splatting constants.

These define the splat *model*, not renderer heuristics: both the tile
rasterizer and the brute-force reference evaluate exactly the same truncated
Gaussian with the same clamps, which is what lets them agree to float
precision.  The truncation sits at 6 sigma (Mahalanobis) where the kernel
value is ~1.5e-8, far below the 1e-5 oracle-agreement budget; tile binning
uses the matching conservative Euclidean radius.
"""

TILE = 16
# skip a splat at a pixel when -power = 0.5 * d^T Sigma^-1 d exceeds this
POWER_CUTOFF = 18.0
TRUNC_SIGMAS = 6.0  # sqrt(2 * POWER_CUTOFF)
ALPHA_MIN = 1e-10
ALPHA_MAX = 0.995
TRANSMITTANCE_STOP = 1e-12
LOWPASS_PX2 = 0.3  # low-pass floor added to the 2D covariance diagonal
