"""Patch feature extraction.

Two extractor variants share one contract:

* :class:`ConvStackExtractor` runs the first three VGG-16 blocks (seven 3x3
  same-padded convolutions with ReLU, 2x2 max-pool after each block) and a
  dense reduction tensor loaded from a weight file.
* :class:`SurrogateExtractor` is a seeded, weight-free stand-in built from
  strided block projections. It is not semantic; it exists so that the
  tracker runs end to end without trained weights.

Both produce a stride-8, 256-channel feature map. A 20x20 window of that map
is Gaussian-masked and contracted to a 256-d unit vector. The batched path
folds the mask into the reduction kernel and slides it over a larger map
without padding, which scores every 160x160 window of an ROI at once.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ContractError

STRIDE = 8
GRID_SIDE = 20  # feature cells covered by one 160x160 patch
PATCH_SIZE = STRIDE * GRID_SIDE
ROI_SIZE = 360
FEATURE_DIM = 256

CONV_LAYERS = (
    ("conv1_1", 3, 64),
    ("conv1_2", 64, 64),
    ("conv2_1", 64, 128),
    ("conv2_2", 128, 128),
    ("conv3_1", 128, 256),
    ("conv3_2", 256, 256),
    ("conv3_3", 256, 256),
)
POOL_AFTER = frozenset({"conv1_2", "conv2_2", "conv3_3"})
REDUCE_KERNEL = "reduce.kernel"


def gaussian_mask(n: int, sigma: float) -> np.ndarray:
    """``n x n`` Gaussian weights peaking at 1 in the centre."""
    if n < 1:
        raise ConfigError(f"mask side must be >= 1, got {n}")
    if not sigma > 0:
        raise ConfigError(f"mask sigma must be positive, got {sigma}")
    i = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    d2 = i[:, None] ** 2 + i[None, :] ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def check_patch(patch, size: int | None = None) -> np.ndarray:
    patch = np.asarray(patch)
    if patch.ndim != 3 or patch.shape[2] != 3:
        raise ContractError(f"expected an H x W x 3 image, got shape {patch.shape}")
    h, w = patch.shape[:2]
    if size is not None and (h, w) != (size, size):
        raise ContractError(f"expected a {size}x{size} patch, got {h}x{w}")
    if h < STRIDE or w < STRIDE or h % STRIDE or w % STRIDE:
        raise ContractError(f"patch sides must be multiples of {STRIDE}, got {h}x{w}")
    patch = patch.astype(np.float32, copy=False)
    if not np.all(np.isfinite(patch)):
        raise ContractError("patch contains non-finite values")
    if patch.min() < 0.0 or patch.max() > 1.0:
        raise ContractError("patch values must lie in [0, 1]")
    return patch


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Normalise the last axis to unit length in float32; zero rows stay zero."""
    v64 = v.astype(np.float64)
    norm = np.linalg.norm(v64, axis=-1, keepdims=True)
    out = np.divide(v64, norm, out=np.zeros_like(v64), where=norm > 0)
    return out.astype(np.float32)


# -- convolution stack --------------------------------------------------


def conv3x3_same(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    h, w, cin = x.shape
    cout = kernel.shape[3]
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    out = np.empty((h * w, cout), dtype=np.float32)
    out[:] = bias
    for dy in range(3):
        for dx in range(3):
            out += xp[dy:dy + h, dx:dx + w].reshape(-1, cin) @ kernel[dy, dx]
    return out.reshape(h, w, cout)


def maxpool2(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    return x.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


def conv_forward(patch, weights) -> np.ndarray:
    """HALF-VGG forward pass: ``H x W x 3`` -> ``H/8 x W/8 x 256``."""
    x = check_patch(patch)
    for name, _, _ in CONV_LAYERS:
        x = conv3x3_same(x, weights[f"{name}.kernel"], weights[f"{name}.bias"])
        np.maximum(x, 0.0, out=x)
        if name in POOL_AFTER:
            x = maxpool2(x)
    return x


# -- reduction ----------------------------------------------------------


def _check_map(fm: np.ndarray, shape=None) -> np.ndarray:
    fm = np.asarray(fm, dtype=np.float32)
    if fm.ndim != 3 or fm.shape[2] != FEATURE_DIM:
        raise ContractError(f"expected an h x w x {FEATURE_DIM} feature map, got {fm.shape}")
    if shape is not None and fm.shape[:2] != shape:
        raise ContractError(f"expected a {shape[0]}x{shape[1]} feature map, got {fm.shape[:2]}")
    if fm.shape[0] < GRID_SIDE or fm.shape[1] < GRID_SIDE:
        raise ContractError(f"feature map smaller than the {GRID_SIDE}x{GRID_SIDE} window")
    return fm


class DenseReduction:
    """Fully-connected ``20 x 20 x C -> 256`` reduction stored as a 4-d kernel."""

    def __init__(self, kernel: np.ndarray):
        self.kernel = np.asarray(kernel, dtype=np.float32)

    def dense(self) -> np.ndarray:
        return self.kernel

    def single(self, fm: np.ndarray, mask: np.ndarray) -> np.ndarray:
        masked = fm * mask[:, :, None]
        return masked.reshape(-1) @ self.kernel.reshape(-1, self.kernel.shape[-1])

    def grid(self, fm: np.ndarray, mask: np.ndarray) -> np.ndarray:
        k = self.kernel * mask[:, :, None, None]
        n = GRID_SIDE
        ho, wo = fm.shape[0] - n + 1, fm.shape[1] - n + 1
        out = np.zeros((ho * wo, k.shape[-1]), dtype=np.float32)
        c = fm.shape[2]
        for dy in range(n):
            for dx in range(n):
                out += fm[dy:dy + ho, dx:dx + wo].reshape(-1, c) @ k[dy, dx]
        return out.reshape(ho, wo, -1)


class FactoredReduction:
    """Reduction kernel ``K[y,x,c,o] = sum_r sum_j row[r,y] col[r,x] compress[c,j] proj[r,j,o]``.

    Equivalent to a dense kernel but evaluated as a channel compression
    followed by separable spatial filters, which keeps the batched path cheap
    enough for per-frame use.
    """

    def __init__(self, row: np.ndarray, col: np.ndarray, compress: np.ndarray, proj: np.ndarray):
        self.row = np.asarray(row, dtype=np.float32)
        self.col = np.asarray(col, dtype=np.float32)
        self.compress = np.asarray(compress, dtype=np.float32)
        self.proj = np.asarray(proj, dtype=np.float32)
        r, j, o = self.proj.shape
        # rows indexed by (compressed channel, term)
        self._stacked = np.ascontiguousarray(self.proj.transpose(1, 0, 2).reshape(j * r, o))
        self._by_term = np.ascontiguousarray(self.proj.reshape(r * j, o))

    def dense(self) -> np.ndarray:
        k = np.einsum("ry,rx,rjo->yxjo", self.row, self.col, self.proj)
        return np.einsum("cj,yxjo->yxco", self.compress, k).astype(np.float32)

    def single(self, fm: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return self.single_compressed(fm @ self.compress, mask)

    def grid(self, fm: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return self.grid_compressed(fm @ self.compress, mask)

    # The *_compressed forms take ``z = fm @ compress`` directly, so a caller
    # whose last layer is linear can fold ``compress`` into it.

    def single_compressed(self, z: np.ndarray, mask: np.ndarray) -> np.ndarray:
        spatial = self.row[:, :, None] * self.col[:, None, :] * mask  # (R, 20, 20)
        t = np.tensordot(z, spatial, axes=([0, 1], [1, 2]))  # (J, R)
        return t.reshape(-1) @ self._stacked

    def grid_compressed(self, z: np.ndarray, mask: np.ndarray) -> np.ndarray:
        # a 2-d Gaussian is separable, so the mask folds into each 1-d basis
        g = _mask_factor(mask)
        rowg = self.row * g[None, :]
        colg = self.col * g[None, :]
        n = GRID_SIDE
        h = z.shape[0]
        ho, wo = h - n + 1, z.shape[1] - n + 1
        r, j, _ = self.proj.shape
        windows = np.ascontiguousarray(sliding_window_view(z, n, axis=1))  # (H, wo, J, 20)
        across = (colg @ windows.reshape(-1, n).T).reshape(r, h, wo * j)
        # vertical pass as one banded matrix per term: band[r, a, a + y] = rowg[r, y]
        band = np.zeros((r, ho, h), dtype=np.float32)
        a = np.arange(ho)
        for y in range(n):
            band[:, a, a + y] = rowg[:, y, None]
        acc = np.matmul(band, across).reshape(r, ho * wo, j)
        flat = np.ascontiguousarray(acc.transpose(1, 0, 2)).reshape(ho * wo, r * j)
        return (flat @ self._by_term).reshape(ho, wo, -1)


def _mask_factor(mask: np.ndarray) -> np.ndarray:
    """Recover ``g`` from a separable mask ``g[:, None] * g[None, :]``.

    The centre of a Gaussian mask is 1 for odd sides and ``g[c]**2`` for even
    sides, so the row through the (rounded-down) centre divided by the sqrt
    of its peak gives ``g``.
    """
    c = (mask.shape[0] - 1) // 2
    return (mask[c] / np.sqrt(mask[c, c])).astype(np.float32)


# -- extractors ---------------------------------------------------------


class Extractor:
    """Common extraction pipeline; subclasses supply :meth:`feature_map`."""

    # pixel value the extractor treats as "no signal"; used to blank regions
    neutral_value = 0.0

    def __init__(self, reduction, mask_sigma: float | None = None):
        self.reduction = reduction
        self.mask_sigma = GRID_SIDE / 4.0 if mask_sigma is None else float(mask_sigma)
        self.mask = gaussian_mask(GRID_SIDE, self.mask_sigma).astype(np.float32)

    def feature_map(self, patch) -> np.ndarray:
        raise NotImplementedError

    def reduce_single(self, fm) -> np.ndarray:
        fm = _check_map(fm, (GRID_SIDE, GRID_SIDE))
        return l2_normalize(self.reduction.single(fm, self.mask))

    def reduce_grid(self, fm) -> np.ndarray:
        """Score every 20x20 window of a feature map: ``(h-19) x (w-19) x 256``."""
        fm = _check_map(fm)
        return l2_normalize(self.reduction.grid(fm, self.mask))

    def reduce_multi(self, fm) -> np.ndarray:
        n = ROI_SIZE // STRIDE
        return self.reduce_grid(_check_map(fm, (n, n)))

    def extract_patch(self, patch) -> np.ndarray:
        patch = check_patch(patch, PATCH_SIZE)
        return self.reduce_single(self.feature_map(patch))

    def extract_grid(self, image) -> np.ndarray:
        """Batched extraction of every stride-8 160x160 window of ``image``."""
        image = check_patch(image)
        if image.shape[0] < PATCH_SIZE or image.shape[1] < PATCH_SIZE:
            raise ContractError(f"image must be at least {PATCH_SIZE}x{PATCH_SIZE}")
        return self.reduce_grid(self.feature_map(image))

    def extract_roi(self, roi) -> np.ndarray:
        roi = check_patch(roi, ROI_SIZE)
        return self.reduce_multi(self.feature_map(roi))


class ConvStackExtractor(Extractor):
    def __init__(self, weights, mask_sigma: float | None = None):
        from .weights import ExtractorWeights

        if not isinstance(weights, ExtractorWeights):
            weights = ExtractorWeights(weights)
        self.weights = weights
        super().__init__(DenseReduction(weights[REDUCE_KERNEL]), mask_sigma)

    def __repr__(self):
        return f"ConvStackExtractor(mask_sigma={self.mask_sigma})"

    def feature_map(self, patch) -> np.ndarray:
        return conv_forward(patch, self.weights)


def _space_to_depth(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    x = x.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 1, 3, 4)
    return x.reshape(h // 2, w // 2, 4 * c)


class SurrogateExtractor(Extractor):
    """Seeded random stand-in for the convolution stack.

    Three stride-2 stages, each a projection of non-overlapping 2x2 blocks.
    The first two stages use ``tanh``, the last is linear; the input is
    centred on mid-grey so the whole map is an odd function of it. Every
    output cell depends only on its own 8x8 pixel block, which makes window
    extraction exactly consistent with whole-ROI extraction.

    The tanh stages are driven hard (``gains``) so they act close to sign
    detectors. At unit gain they stay nearly linear and separate textures
    poorly, which shows up as the tracker sliding onto similar background.
    """

    widths = (48, 96, FEATURE_DIM)
    gains = (12.0, 6.0, 1.0)
    neutral_value = 0.5

    def __init__(self, seed: int = 0, mask_sigma: float | None = None, terms: int = 16, width: int = 64):
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        cin = 3
        self.stages = []
        for cout, gain in zip(self.widths, self.gains):
            fan_in = 4 * cin
            a = rng.standard_normal((fan_in, cout)) * (gain * np.sqrt(2.0 / fan_in))
            self.stages.append(a.astype(np.float32))
            cin = cout
        row = rng.standard_normal((terms, GRID_SIDE))
        col = rng.standard_normal((terms, GRID_SIDE))
        compress = rng.standard_normal((FEATURE_DIM, width)) / np.sqrt(FEATURE_DIM)
        proj = rng.standard_normal((terms, width, FEATURE_DIM)) / np.sqrt(terms * width)
        super().__init__(FactoredReduction(row, col, compress, proj), mask_sigma)
        # last stage and channel compression are both linear: one 4C x J product
        self._folded = (self.stages[-1].astype(np.float64) @ compress).astype(np.float32)

    def __repr__(self):
        return f"SurrogateExtractor(seed={self.seed}, mask_sigma={self.mask_sigma})"

    def _hidden(self, patch) -> np.ndarray:
        x = check_patch(patch) - np.float32(0.5)
        for a in self.stages[:-1]:
            x = _space_to_depth(x) @ a
            np.tanh(x, out=x)
        return _space_to_depth(x)

    def feature_map(self, patch) -> np.ndarray:
        return self._hidden(patch) @ self.stages[-1]

    def extract_patch(self, patch) -> np.ndarray:
        z = self._hidden(check_patch(patch, PATCH_SIZE)) @ self._folded
        return l2_normalize(self.reduction.single_compressed(z, self.mask))

    def extract_grid(self, image) -> np.ndarray:
        image = check_patch(image)
        if image.shape[0] < PATCH_SIZE or image.shape[1] < PATCH_SIZE:
            raise ContractError(f"image must be at least {PATCH_SIZE}x{PATCH_SIZE}")
        z = self._hidden(image) @ self._folded
        return l2_normalize(self.reduction.grid_compressed(z, self.mask))

    def extract_roi(self, roi) -> np.ndarray:
        return self.extract_grid(check_patch(roi, ROI_SIZE))
