"""Three-stage patch-based super-resolution.

(A) extract matched HR/LR patch pairs from a reference image pair and
learn a joint mixture over the concatenated HR-first vectors, (B) for
each LR patch of the input pick the best component and take the MMSE
conditional estimate of its HR block, (C) blend the overlapping HR
patches with center-weighted Gaussian masks.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .conditional import BlockPartition, MmseConditioner
from .mixture import Ggmm, fit

__all__ = [
    "MODEL_FORMAT_VERSION",
    "PatchGeometry",
    "JointModel",
    "extract_patches",
    "build_joint_samples",
    "crop_training_quarter",
    "train",
    "estimate_hr_patches",
    "aggregation_weights",
    "aggregate",
    "super_resolve",
]

MODEL_FORMAT_VERSION = 1
_MODEL_KIND = "ggmm-sr-joint-model"


@dataclass(frozen=True)
class PatchGeometry:
    """Patch sizes, strides, and the aggregation decay.

    LR patches have side ``tau``; the matched HR patches have side
    ``q * tau``, so joint vectors live in dimension (q^2 + 1) tau^2.
    """

    tau: int
    q: int
    stride_train: int = 2
    stride_recon: int = 1
    gamma: float = 0.1

    def __post_init__(self):
        if self.tau < 2:
            raise ValueError(f"tau must be >= 2, got {self.tau}")
        if self.q < 2:
            raise ValueError(f"q must be >= 2, got {self.q}")
        for name in ("stride_train", "stride_recon"):
            stride = getattr(self, name)
            if not (1 <= stride <= self.tau):
                raise ValueError(f"{name} must lie in [1, tau], got {stride}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def lr_dim(self):
        return self.tau * self.tau

    @property
    def hr_dim(self):
        return self.q * self.q * self.tau * self.tau

    @property
    def joint_dim(self):
        return self.hr_dim + self.lr_dim

    @property
    def hr_side(self):
        return self.q * self.tau

    def block_partition(self):
        return BlockPartition(self.hr_dim, self.lr_dim)

    def to_dict(self):
        return {
            "tau": self.tau,
            "q": self.q,
            "stride_train": self.stride_train,
            "stride_recon": self.stride_recon,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(
                tau=int(doc["tau"]),
                q=int(doc["q"]),
                stride_train=int(doc["stride_train"]),
                stride_recon=int(doc["stride_recon"]),
                gamma=float(doc["gamma"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed geometry document: {exc}") from exc


@dataclass
class JointModel:
    """Trained joint mixture plus the geometry and pixel normalization."""

    ggmm: Ggmm
    geometry: PatchGeometry
    offset: float
    scale: float

    def __post_init__(self):
        if self.ggmm.p != self.geometry.joint_dim:
            raise ValueError(
                f"mixture dimension {self.ggmm.p} does not match geometry "
                f"joint dimension {self.geometry.joint_dim}"
            )
        if not (np.isfinite(self.offset) and np.isfinite(self.scale)):
            raise ValueError("normalization must be finite")
        if self.scale <= 0:
            raise ValueError("normalization scale must be positive")

    def to_json(self):
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": _MODEL_KIND,
            "geometry": self.geometry.to_dict(),
            "normalization": {"offset": self.offset, "scale": self.scale},
            "ggmm": self.ggmm.to_dict(),
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"model file is not valid JSON: {exc}") from exc
        try:
            version = doc["format_version"]
            kind = doc["kind"]
            geometry = doc["geometry"]
            norm = doc["normalization"]
            ggmm = doc["ggmm"]
            offset = float(norm["offset"])
            scale = float(norm["scale"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed model document: {exc}") from exc
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        if kind != _MODEL_KIND:
            raise ValueError(f"unexpected model kind {kind!r}")
        return cls(
            ggmm=Ggmm.from_dict(ggmm),
            geometry=PatchGeometry.from_dict(geometry),
            offset=offset,
            scale=scale,
        )


def _check_image(img, name="image"):
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def _axis_positions(size, side, stride):
    if size < side:
        raise ValueError(f"image extent {size} is smaller than patch side {side}")
    last = size - side
    positions = list(range(0, last + 1, stride))
    if positions[-1] != last:
        # Edge clamp: always include the final window so any stride
        # yields full coverage.
        positions.append(last)
    return positions


def extract_patches(img, side, stride):
    """All fully contained side x side windows at the given stride.

    The final row/column of windows is edge-clamped so coverage is
    complete for any stride.  Returns (patches, positions) where
    ``patches`` has shape (n, side^2) (row-major vectorization) and
    ``positions`` holds the (row, col) of each window's top-left pixel.
    """
    arr = _check_image(img)
    if side < 1 or stride < 1:
        raise ValueError("side and stride must be >= 1")
    rows = _axis_positions(arr.shape[0], side, stride)
    cols = _axis_positions(arr.shape[1], side, stride)
    n = len(rows) * len(cols)
    patches = np.empty((n, side * side))
    positions = np.empty((n, 2), dtype=int)
    i = 0
    for r in rows:
        for c in cols:
            patches[i] = arr[r : r + side, c : c + side].ravel()
            positions[i] = (r, c)
            i += 1
    return patches, positions


def _check_pair(hr, lr, q):
    hr = _check_image(hr, "hr")
    lr = _check_image(lr, "lr")
    expected = (q * lr.shape[0], q * lr.shape[1])
    if hr.shape != expected:
        raise ValueError(
            f"hr shape {hr.shape} must be q={q} times lr shape {lr.shape}"
        )
    return hr, lr


def build_joint_samples(hr, lr, geom, offset=0.0, scale=1.0):
    """Concatenated HR-first training vectors, one per LR training patch.

    The LR patch at LR position (r, c) pairs with the (q tau)-sided HR
    window at HR position (q r, q c).  Pixel values are shifted by
    ``offset`` and divided by ``scale``.
    """
    hr, lr = _check_pair(hr, lr, geom.q)
    lr_patches, lr_pos = extract_patches(lr, geom.tau, geom.stride_train)
    n = lr_patches.shape[0]
    side = geom.hr_side
    joint = np.empty((n, geom.joint_dim))
    for i, (r, c) in enumerate(lr_pos):
        hr_r, hr_c = geom.q * r, geom.q * c
        joint[i, : geom.hr_dim] = hr[hr_r : hr_r + side, hr_c : hr_c + side].ravel()
        joint[i, geom.hr_dim :] = lr_patches[i]
    return (joint - offset) / scale


def crop_training_quarter(hr, lr, q):
    """Upper-left quarter of a matched pair, aligned to the LR grid."""
    hr, lr = _check_pair(hr, lr, q)
    ch = lr.shape[0] // 2
    cw = lr.shape[1] // 2
    return hr[: q * ch, : q * cw], lr[:ch, :cw]


def train(hr, lr, geom, em_config):
    """Learn a joint model from a matched HR/LR reference pair.

    Pixels are normalized to zero mean and unit standard deviation
    (computed over both images) before fitting; the normalization is
    stored on the model.  Any region selection (such as training on the
    upper-left quarter) is the caller's job.

    Returns
    -------
    (JointModel, FitReport)
    """
    hr, lr = _check_pair(hr, lr, geom.q)
    pixels = np.concatenate([hr.ravel(), lr.ravel()])
    offset = float(pixels.mean())
    scale = float(pixels.std())
    if scale <= 0.0:
        scale = 1.0
    samples = build_joint_samples(hr, lr, geom, offset, scale)
    ggmm, report = fit(samples, em_config)
    return JointModel(ggmm, geom, offset, scale), report


def estimate_hr_patches(lr, model, workers=1):
    """Per-patch HR estimates for every LR patch at the recon stride.

    Each LR patch is normalized, scored against all components, and
    mapped through the selected component's conditional mean; estimates
    are de-normalized on the way out.  HR positions are q times the LR
    positions.  ``workers`` > 1 splits the patch batch across threads
    with a fixed merge order, so results do not depend on worker count.

    Returns
    -------
    (hr_vectors, hr_positions) with shapes (n, q^2 tau^2) and (n, 2).
    """
    lr = _check_image(lr, "lr")
    geom = model.geometry
    patches, positions = extract_patches(lr, geom.tau, geom.stride_recon)
    obs = (patches - model.offset) / model.scale
    conditioner = MmseConditioner(model.ggmm, geom.block_partition())
    if workers > 1 and obs.shape[0] > workers:
        chunks = np.array_split(obs, workers * 4)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(conditioner.estimate, chunks))
        estimates = np.concatenate(parts, axis=0)
    else:
        estimates = conditioner.estimate(obs)
    return estimates * model.scale + model.offset, geom.q * positions


def aggregation_weights(q, tau, gamma):
    """Center-peaked aggregation mask of shape (q tau, q tau).

    With 1-based indices k, l the weight is
    exp(-gamma/2 * ((k - (q tau + 1)/2)^2 + (l - (q tau + 1)/2)^2)),
    maximal at the patch center and symmetric under k <-> l and under
    reflection about the center.  gamma = 0 gives uniform averaging.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    side = q * tau
    if side < 1:
        raise ValueError("q * tau must be >= 1")
    center = 0.5 * (side + 1)
    d2 = (np.arange(1, side + 1, dtype=float) - center) ** 2
    return np.exp(-0.5 * gamma * (d2[:, None] + d2[None, :]))


def aggregate(patches, positions, mask, out_shape):
    """Blend overlapping square patches into an image.

    Every output pixel must be covered by at least one patch; the pixel
    value is the mask-weighted average of the covering patch values.
    """
    patches = np.asarray(patches, dtype=float)
    positions = np.asarray(positions, dtype=int)
    mask = np.asarray(mask, dtype=float)
    side = mask.shape[0]
    if mask.shape != (side, side):
        raise ValueError("mask must be square")
    if patches.ndim != 2 or patches.shape[1] != side * side:
        raise ValueError(f"patches must have shape (n, {side * side})")
    if positions.shape != (patches.shape[0], 2):
        raise ValueError("need one (row, col) position per patch")
    h, w = out_shape
    num = np.zeros((h, w))
    den = np.zeros((h, w))
    for vec, (r, c) in zip(patches, positions):
        if r < 0 or c < 0 or r + side > h or c + side > w:
            raise ValueError(f"patch at ({r}, {c}) does not fit in {out_shape}")
        block = vec.reshape(side, side)
        num[r : r + side, c : c + side] += mask * block
        den[r : r + side, c : c + side] += mask
    if np.any(den <= 0.0):
        raise ValueError("aggregation left uncovered pixels")
    return num / den


def super_resolve(lr, model, workers=1):
    """Full reconstruction: estimate HR patches, blend, clip to [0, 1]."""
    lr = _check_image(lr, "lr")
    geom = model.geometry
    vectors, positions = estimate_hr_patches(lr, model, workers=workers)
    mask = aggregation_weights(geom.q, geom.tau, geom.gamma)
    out_shape = (geom.q * lr.shape[0], geom.q * lr.shape[1])
    out = aggregate(vectors, positions, mask, out_shape)
    return np.clip(out, 0.0, 1.0)
