"""avf: native generative 3D head avatars.

Three renderable representations of a parametric head (volume radiance
field, hex-plane hybrid, Gaussian-splat point model) over a shared bilinear
blendshape model, with differentiable rendering, single-image fitting and
blendshape animation.
"""

__version__ = "0.1.0"
