"""Training objectives as pure differentiable functions.

Reductions are mean everywhere (one documented convention): image losses
average over pixels, ray losses over the ray batch, and the map regularizers
are root-mean-square norms.  Loss weights default to the published values
(point total 1.0 / 0.1 / 1.0, hybrid adversarial weight 0.01) and every
total records its effective weights in a LossReport.

The generator objective is implemented literally as log(1 - sigmoid(D));
the widely used non-saturating alternative -log sigmoid(D) sits behind the
``non_saturating`` flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .diffcore import Tensor, mlp_forward
from .diffcore import tensor as ops

_NORM_EPS = 1e-24  # keeps sqrt differentiable at exactly-zero inputs


class LossError(ValueError):
    pass


def _rms(t: Tensor) -> Tensor:
    return ops.sqrt((t * t).mean() + _NORM_EPS)


def l_volume(coarse: Tensor, fine: Tensor, gt) -> Tensor:
    """Coarse + fine per-ray L2 color error, averaged over the ray batch."""
    gt = ops.as_tensor(gt)
    if coarse.shape != gt.shape or fine.shape != gt.shape:
        raise LossError("ray batches must share shape")

    def ray_norm(pred):
        d = pred - gt
        return ops.sqrt((d * d).sum(axis=-1) + _NORM_EPS).mean()

    return ray_norm(coarse) + ray_norm(fine)


def l_l1(image: Tensor, gt) -> Tensor:
    """Mean absolute error between two images."""
    image = ops.as_tensor(image)
    gt = ops.as_tensor(gt)
    if image.shape != gt.shape:
        raise LossError(f"image shapes differ: {image.shape} vs {gt.shape}")
    return ops.absolute(image - gt).mean()


def l_l1_point(image_raw: Tensor, image: Tensor, gt) -> Tensor:
    """Point-model photometric loss supervising both the raw and refined images.

    With the identity refiner this is exactly 2 * l_l1(image_raw, gt).
    """
    return l_l1(image_raw, gt) + l_l1(image, gt)


def reg_scale(raw_scale_channels: Tensor) -> Tensor:
    """RMS of the raw scale channels (keeps splat sizes in range)."""
    return _rms(ops.as_tensor(raw_scale_channels))


def reg_offset(raw_offset_channels: Tensor) -> Tensor:
    """RMS of the raw offset channels (keeps hair splats near the scalp)."""
    return _rms(ops.as_tensor(raw_offset_channels))


# -- adversarial pieces ---------------------------------------------------


@dataclass
class PatchDiscriminator:
    """3-layer MLP over average-pooled grayscale patches.

    Single-resolution on purpose: raw renders and ground truth share a size
    in the point model, so no dual discrimination is needed.  The input
    gradient used by the R1 penalty is computed in closed form so the
    penalty stays differentiable w.r.t. the discriminator weights.
    """

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    w3: Tensor
    b3: Tensor
    patch: int = 16

    @staticmethod
    def create(patch: int, hidden: int, seed: int) -> "PatchDiscriminator":
        rng = np.random.default_rng(seed)
        n_in = patch * patch

        def lin(n, m):
            return Tensor(rng.normal(0, np.sqrt(2.0 / (n + m)), size=(n, m)), requires_grad=True)

        return PatchDiscriminator(
            w1=lin(n_in, hidden), b1=Tensor(np.zeros(hidden), requires_grad=True),
            w2=lin(hidden, hidden), b2=Tensor(np.zeros(hidden), requires_grad=True),
            w3=lin(hidden, 1), b3=Tensor(np.zeros(1), requires_grad=True),
            patch=patch,
        )

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def _pool_factor(self, image: Tensor) -> int:
        h, w = image.shape[0], image.shape[1]
        if h != w or h % self.patch != 0:
            raise LossError(f"image size {h}x{w} must be a square multiple of patch {self.patch}")
        return h // self.patch

    def pooled(self, image: Tensor) -> Tensor:
        """(H, W, 3) -> flattened grayscale patch grid, differentiable."""
        image = ops.as_tensor(image)
        k = self._pool_factor(image)
        gray = image.mean(axis=2)
        coarse = gray.reshape(self.patch, k, self.patch, k).mean(axis=3).mean(axis=1)
        return coarse.reshape(self.patch * self.patch)

    def _hidden(self, x: Tensor):
        h1 = ops.tanh(ops.matmul(x, self.w1) + self.b1)
        h2 = ops.tanh(ops.matmul(h1, self.w2) + self.b2)
        return h1, h2

    def logit(self, image: Tensor) -> Tensor:
        """Scalar realness logit for one image."""
        x = self.pooled(image)
        _, h2 = self._hidden(x)
        return (ops.matmul(h2, self.w3) + self.b3)[0]

    def input_gradient(self, image: Tensor) -> Tensor:
        """Closed-form d(logit)/d(image), itself differentiable w.r.t. weights."""
        image = ops.as_tensor(image)
        k = self._pool_factor(image)
        x = self.pooled(image)
        h1, h2 = self._hidden(x)
        g2 = (1.0 - h2 * h2) * self.w3[:, 0]
        g1 = (1.0 - h1 * h1) * ops.matmul(self.w2, g2)
        gx = ops.matmul(self.w1, g1)  # gradient w.r.t. pooled input
        # adjoint of (grayscale mean over 3 channels, k x k average pooling)
        grid = gx.reshape(self.patch, 1, self.patch, 1)
        up = (grid * np.ones((1, k, 1, k))).reshape(image.shape[0], image.shape[1], 1)
        return up * np.full(3, 1.0 / (3.0 * k * k))


def gan_losses(disc, real_batch, fake_batch, gamma: float,
               non_saturating: bool = False) -> tuple[Tensor, Tensor]:
    """(generator loss, discriminator loss with R1) over image batches.

    ``disc`` must expose ``logit(image) -> scalar Tensor`` and, when gamma
    is nonzero, ``input_gradient(image)``.
    """
    fake_logits = [disc.logit(img) for img in fake_batch]
    real_logits = [disc.logit(img) for img in real_batch]
    for lg in fake_logits + real_logits:
        if lg.size != 1:
            raise LossError("discriminator must return a scalar logit per image")

    def mean_of(parts):
        return ops.stack(parts).mean()

    if non_saturating:
        loss_g = mean_of([-ops.log(ops.sigmoid(lg) + 1e-12) for lg in fake_logits])
    else:
        loss_g = mean_of([ops.log(1.0 - ops.sigmoid(lg) + 1e-12) for lg in fake_logits])
    loss_d = mean_of([-ops.log(ops.sigmoid(lg) + 1e-12) for lg in real_logits])
    if gamma != 0.0:
        r1 = mean_of([(disc.input_gradient(img) ** 2.0).sum() for img in real_batch])
        loss_d = loss_d + r1 * (gamma / 2.0)
    return loss_g, loss_d


# -- weighted totals ------------------------------------------------------


@dataclass
class LossReport:
    terms: dict[str, float]
    weights: dict[str, float]
    total: float

    def __post_init__(self):
        for name, value in self.terms.items():
            if not np.isfinite(value):
                raise LossError(f"non-finite loss term {name!r}")
        check = sum(self.weights[k] * self.terms[k] for k in self.terms)
        if abs(check - self.total) > 1e-12 * max(1.0, abs(self.total)):
            raise LossError("total does not match the weighted sum of terms")

    def to_json_line(self, step: int | None = None) -> str:
        rec = {"terms": self.terms, "weights": self.weights, "total": self.total}
        if step is not None:
            rec["step"] = step
        return json.dumps(rec, sort_keys=True)


def _weighted_total(terms: dict[str, Tensor], weights: dict[str, float]) -> tuple[Tensor, LossReport]:
    missing = set(weights) - set(terms)
    if missing:
        raise LossError(f"missing loss terms: {sorted(missing)}")
    total = None
    for name, w in weights.items():
        contrib = terms[name] * w
        total = contrib if total is None else total + contrib
    report = LossReport(
        terms={k: float(terms[k].data) for k in weights},
        weights=dict(weights),
        total=float(total.data),
    )
    return total, report


POINT_WEIGHTS = {"l1": 1.0, "gan": 1.0, "scale": 0.1, "offset": 1.0}
HYBRID_GAN_WEIGHT = 0.01


def total_point(terms: dict[str, Tensor], lambda_gan: float = 1.0, lambda_scale: float = 0.1,
                lambda_offset: float = 1.0) -> tuple[Tensor, LossReport]:
    """Point-model total: L1 + 1.0 GAN + 0.1 scale + 1.0 offset by default."""
    weights = {"l1": 1.0, "gan": lambda_gan, "scale": lambda_scale, "offset": lambda_offset}
    return _weighted_total(terms, weights)


def total_hybrid(terms: dict[str, Tensor], step: int = 0, lambda_gan: float = HYBRID_GAN_WEIGHT,
                 lambda_density: float = 1.0, density_interval: int = 4) -> tuple[Tensor, LossReport]:
    """Hybrid total: L1 + 0.01 GAN + density TV activated every Nth step."""
    active = lambda_density if (density_interval <= 1 or step % density_interval == 0) else 0.0
    weights = {"l1": 1.0, "gan": lambda_gan, "density": active}
    return _weighted_total(terms, weights)
