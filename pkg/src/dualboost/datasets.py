"""Synthetic bimodal datasets and the plain-text dataset format.

Every generator is a pure function of its :class:`GenSpec`. Generators return
one Dataset holding ``n_train + n_valid`` rows (training rows first);
:func:`generate` splits it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import ConfigError, Dataset, DomainError
from .gbm import fit_gbm

KINDS = ("split_tabular", "linear_margin", "shapes", "xor_bimodal")

# bounding-box minima (pixels at side 128) for mixed / triangle / rectangle classes
_SHAPE_MIN_PX = (10, 20, 15)
_REFERENCE_SIDE = 128


class DatasetParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class GenSpec:
    kind: str = "xor_bimodal"
    n_train: int = 1000
    n_valid: int = 200
    dim_u: int = 10
    dim_s: int = 10
    num_classes: int = 2
    noise_rate: float = 0.09
    seed: int = 0
    # linear_margin
    mu: float = 0.5
    class0_prior: float = 0.47
    # shapes
    side: int = 32
    s_sep: float = 1.0
    # xor_bimodal
    leakage: float = 0.7
    blob_noise: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"dataset kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 <= self.noise_rate < 1:
            raise ConfigError("noise_rate must lie in [0, 1)")
        if self.dim_u < 1 or self.dim_s < 1:
            raise ConfigError("dimensions must be positive")
        if self.n_train < 0 or self.n_valid < 0:
            raise ConfigError("sample counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.n_train + self.n_valid

    def to_dict(self) -> dict:
        return asdict(self)


def apply_label_noise(labels: np.ndarray, rate: float, num_classes: int, rng: np.random.Generator):
    """Move a ``rate`` fraction of labels, chosen at random, to a different class."""
    labels = np.asarray(labels, dtype=np.int64)
    flip = rng.random(len(labels)) < rate
    offset = rng.integers(1, num_classes, size=len(labels))
    noisy = np.where(flip, (labels + offset) % num_classes, labels)
    return noisy, flip


def _finish(spec: GenSpec, xu, xs, clean, rng, **meta) -> Dataset:
    y, flipped = apply_label_noise(clean, spec.noise_rate, spec.num_classes, rng)
    meta.update(clean_labels=clean, flipped=flipped, n_train=spec.n_train, spec=spec.to_dict())
    return Dataset(xu, xs, y, spec.num_classes, spec.seed, meta)


def gen_linear_margin(spec: GenSpec) -> Dataset:
    """Structured features on a fixed side of a random hyperplane per class.

    Class 0 samples satisfy w.x_s > 0 and class 1 samples w.x_s < 0. The
    unstructured modality is a pair of Gaussian blobs centred at +mu and -mu.
    """
    if spec.num_classes != 2:
        raise ConfigError("linear_margin is a binary construction")
    rng = np.random.default_rng(spec.seed)
    w = rng.standard_normal(spec.dim_s)
    w /= np.linalg.norm(w)
    clean = (rng.random(spec.n) >= spec.class0_prior).astype(np.int64)
    xs = rng.standard_normal((spec.n, spec.dim_s))
    wrong_side = (xs @ w > 0) != (clean == 0)
    xs[wrong_side] *= -1.0
    sign = np.where(clean == 0, 1.0, -1.0)
    xu = rng.standard_normal((spec.n, spec.dim_u)) + spec.mu * sign[:, None]
    return _finish(spec, xu, xs, clean, rng, separator=w)


def _draw_shape(img: np.ndarray, kind: str, min_px: int, rng: np.random.Generator):
    from skimage.draw import polygon

    side = img.shape[0]
    if kind == "rectangle":
        h, w = rng.integers(min_px, side + 1, size=2)
        r0 = rng.integers(0, side - h + 1)
        c0 = rng.integers(0, side - w + 1)
        img[r0:r0 + h, c0:c0 + w] = 0.0
        return
    s = int(rng.integers(min_px, side + 1))
    r0 = rng.integers(0, side - s + 1)
    c0 = rng.integers(0, side - s + 1)
    rows = np.array([r0 + s - 1, r0 + s - 1, r0])
    cols = np.array([c0, c0 + s - 1, c0 + (s - 1) / 2.0])
    rr, cc = polygon(rows, cols, shape=img.shape)
    img[rr, cc] = 0.0


def render_shapes(label: int, side: int, rng: np.random.Generator):
    """One raster for a class; returns (flattened image, shape kinds drawn).

    Class 0 draws triangles and rectangles mixed, class 1 triangles only,
    class 2 rectangles only. Images left without any background are redrawn.
    """
    min_px = max(2, math.ceil(_SHAPE_MIN_PX[label] * side / _REFERENCE_SIDE))
    while True:
        img = np.ones((side, side))
        count = int(rng.integers(1, 11))
        if label == 0:
            kinds = [("triangle", "rectangle")[int(b)] for b in rng.integers(0, 2, size=count)]
        else:
            kinds = [("triangle" if label == 1 else "rectangle")] * count
        for kind in kinds:
            _draw_shape(img, kind, min_px, rng)
        if img.max() == 1.0:
            return img.ravel(), kinds


def gen_shapes(spec: GenSpec) -> Dataset:
    """Shape rasters as the unstructured modality; class-conditional Gaussians as the structured one."""
    if spec.num_classes != 3:
        raise ConfigError("shapes has exactly 3 classes")
    if spec.side < 8:
        raise ConfigError(f"image side must be >= 8, got {spec.side}")
    rng = np.random.default_rng([spec.seed, 0])
    clean = rng.integers(0, 3, size=spec.n)
    means = rng.standard_normal((3, spec.dim_s)) * spec.s_sep
    xs = means[clean] + rng.standard_normal((spec.n, spec.dim_s))
    xu = np.empty((spec.n, spec.side * spec.side))
    kinds = []
    for i, c in enumerate(clean):
        # per-sample stream: rendering one image never shifts another
        img, k = render_shapes(int(c), spec.side, np.random.default_rng([spec.seed, 1, i]))
        xu[i] = img
        kinds.append(k)
    noise_rng = np.random.default_rng([spec.seed, 2])
    return _finish(spec, xu, xs, clean, noise_rng, shape_kinds=kinds)


def gen_xor_bimodal(spec: GenSpec) -> Dataset:
    """Label = b_s XOR b_u, each bit visible only in its own modality.

    Coordinate 0 of each modality carries its bit as a blob at +/-1 with
    ``blob_noise`` spread; coordinate 1 (when present) leaks the clean label
    with strength ``leakage`` under unit noise; other coordinates are noise.
    """
    if spec.num_classes != 2:
        raise ConfigError("xor_bimodal is a binary construction")
    if spec.leakage and (spec.dim_s < 2 or spec.dim_u < 2):
        raise ConfigError("label leakage needs at least 2 dimensions per modality")
    rng = np.random.default_rng(spec.seed)
    b_s = rng.integers(0, 2, size=spec.n)
    b_u = rng.integers(0, 2, size=spec.n)
    clean = b_s ^ b_u

    def modality(bit, dim):
        x = rng.standard_normal((spec.n, dim))
        x[:, 0] = (2.0 * bit - 1.0) + spec.blob_noise * x[:, 0]
        if dim > 1:
            x[:, 1] += spec.leakage * (2.0 * clean - 1.0)
        return x

    xs = modality(b_s, spec.dim_s)
    xu = modality(b_u, spec.dim_u)
    return _finish(spec, xu, xs, clean, rng, bits_s=b_s, bits_u=b_u)


_GENERATORS = {
    "linear_margin": gen_linear_margin,
    "shapes": gen_shapes,
    "xor_bimodal": gen_xor_bimodal,
}


def generate(spec: GenSpec) -> tuple[Dataset, Dataset]:
    """Generate a dataset and split it into (train, valid)."""
    if spec.kind not in _GENERATORS:
        raise ConfigError(f"{spec.kind!r} is built from external data with split_tabular")
    ds = _GENERATORS[spec.kind](spec)
    return split_train_valid(ds, spec.n_train)


def split_train_valid(ds: Dataset, n_train: int) -> tuple[Dataset, Dataset]:
    train = ds.subset(slice(0, n_train))
    valid = ds.subset(slice(n_train, ds.n))
    return train, valid


def split_tabular(features, labels, importance_split: bool = False, split_seed: int = 0,
                  gbm_params: dict | None = None, num_classes: int | None = None) -> Dataset:
    """Turn one tabular matrix into a bimodal dataset by assigning columns.

    ``ceil(d/2)`` columns go to the structured side: a seeded random choice,
    or with ``importance_split`` the columns with the largest total split gain
    in a small GBM fitted to the labels. The rest form the other modality.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ConfigError("split_tabular needs at least 2 feature columns")
    d = X.shape[1]
    k = math.ceil(d / 2)
    M = int(num_classes if num_classes is not None else y.max() + 1)
    if importance_split:
        params = {"n_stages": 20, "learning_rate": 0.1, "max_depth": 3, **(gbm_params or {})}
        model = fit_gbm(X, y, M, params["n_stages"], params["learning_rate"], params["max_depth"])
        gains = model.feature_gains(d)
        order = np.argsort(-gains, kind="stable")
    else:
        order = np.random.default_rng(split_seed).permutation(d)
    s_cols = sorted(int(c) for c in order[:k])
    u_cols = sorted(int(c) for c in order[k:])
    meta = {"s_columns": s_cols, "u_columns": u_cols, "importance_split": importance_split}
    return Dataset(X[:, u_cols], X[:, s_cols], y, M, split_seed, meta)


def load_csv(path):
    """Read a numeric CSV with a ``label`` column; returns (features, labels, column names)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetParseError("empty CSV file", 1) from None
        if "label" not in header:
            raise DatasetParseError("CSV header has no 'label' column", 1)
        li = header.index("label")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                labels.append(int(float(row[li])))
                rows.append([float(v) for i, v in enumerate(row) if i != li])
            except ValueError as exc:
                raise DatasetParseError(str(exc), lineno) from exc
    names = [h for i, h in enumerate(header) if i != li]
    return np.array(rows, dtype=float).reshape(len(rows), len(names)), np.array(labels, dtype=np.int64), names


def save_dataset(ds: Dataset, path):
    """Header ``M dim_u dim_s n`` then one line per sample: label, x_u, x_s."""
    with open(path, "w") as fh:
        fh.write(f"{ds.num_classes} {ds.dim_u} {ds.dim_s} {ds.n}\n")
        for label, u, s in zip(ds.y.tolist(), ds.xu.tolist(), ds.xs.tolist()):
            fh.write(" ".join([str(label), *map(repr, u), *map(repr, s)]))
            fh.write("\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetParseError("empty dataset file", 1)
    try:
        M, du, ds_, n = (int(v) for v in lines[0].split())
    except ValueError:
        raise DatasetParseError("header must be 'M dim_u dim_s n'", 1) from None
    body = lines[1:]
    if len(body) < n:
        raise DatasetParseError(f"header declares {n} samples but file has {len(body)}", len(lines) + 1)
    if any(line.strip() for line in body[n:]):
        raise DatasetParseError(f"unexpected content after {n} samples", n + 2)
    width = 1 + du + ds_
    y = np.empty(n, dtype=np.int64)
    X = np.empty((n, du + ds_))
    for i, line in enumerate(body[:n]):
        tokens = line.split()
        if len(tokens) != width:
            raise DatasetParseError(f"row {i} has {len(tokens)} fields, header implies {width}", i + 2)
        try:
            y[i] = int(tokens[0])
            X[i] = [float(t) for t in tokens[1:]]
        except ValueError as exc:
            raise DatasetParseError(f"row {i}: {exc}", i + 2) from exc
    try:
        return Dataset(X[:, :du], X[:, du:], y, M)
    except (DomainError, ValueError, ArithmeticError) as exc:
        raise DatasetParseError(str(exc)) from exc
