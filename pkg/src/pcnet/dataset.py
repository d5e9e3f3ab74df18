"""Synthetic 4-class object clouds, scene splicing, balancing, and file IO.

Objects are surface samples of simple primitives at roughly real-world
scale: cars and trucks are boxes, a person is a vertical cylinder, a
bicycle is a thin frame of two wheels and a bar.  Pose jitter (uniform yaw,
bounded centroid offset) and Gaussian surface noise keep the classes from
being trivially separable by a single coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geom import as_cloud
from .seeding import fork_seed

CLASS_NAMES = ("car", "truck", "person", "bicycle")
NUM_CLASSES = len(CLASS_NAMES)

CAR_SIZE = (4.5, 1.8, 1.5)
TRUCK_SIZE = (8.0, 2.5, 3.0)
PERSON_RADIUS = 0.3
PERSON_HEIGHT = 1.7
WHEEL_RADIUS = 0.35
FRAME_LENGTH = 1.0


@dataclass
class LabeledCloud:
    points: np.ndarray
    label: int

    def __post_init__(self):
        self.points = as_cloud(self.points)
        self.label = int(self.label)
        if not 0 <= self.label < NUM_CLASSES:
            raise ValueError(f"label must be in [0, {NUM_CLASSES}), got {self.label}")


@dataclass
class BoxAnnotation:
    center: tuple[float, float, float]
    size: tuple[float, float, float]  # (l, w, h)
    yaw: float
    label: int

    def __post_init__(self):
        if len(self.center) != 3 or len(self.size) != 3:
            raise ValueError("center and size must have 3 components")
        if any(not (s > 0) for s in self.size):
            raise ValueError(f"box size components must be positive, got {self.size}")
        if not 0 <= int(self.label) < NUM_CLASSES:
            raise ValueError(f"label must be in [0, {NUM_CLASSES}), got {self.label}")


def class_index(label) -> int:
    """Accept either a class index or a class name."""
    if isinstance(label, str):
        if label not in CLASS_NAMES:
            raise ValueError(f"unknown class {label!r}, expected one of {CLASS_NAMES}")
        return CLASS_NAMES.index(label)
    idx = int(label)
    if not 0 <= idx < NUM_CLASSES:
        raise ValueError(f"unknown class index {idx}, expected 0..{NUM_CLASSES - 1}")
    return idx


def _rot_z(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _sample_box(rng: np.random.Generator, n: int, size) -> np.ndarray:
    l, w, h = size
    # Face order: z=+-h/2, y=+-w/2, x=+-l/2; pick faces by area.
    areas = np.array([l * w, l * w, l * h, l * h, w * h, w * h])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=n)
    v = rng.uniform(-0.5, 0.5, size=n)
    pts = np.empty((n, 3))
    for f in range(6):
        m = face == f
        if f < 2:
            pts[m, 0] = u[m] * l
            pts[m, 1] = v[m] * w
            pts[m, 2] = (0.5 if f == 0 else -0.5) * h
        elif f < 4:
            pts[m, 0] = u[m] * l
            pts[m, 1] = (0.5 if f == 2 else -0.5) * w
            pts[m, 2] = v[m] * h
        else:
            pts[m, 0] = (0.5 if f == 4 else -0.5) * l
            pts[m, 1] = u[m] * w
            pts[m, 2] = v[m] * h
    return pts


def _sample_cylinder(rng: np.random.Generator, n: int, radius: float, height: float) -> np.ndarray:
    lateral = 2.0 * np.pi * radius * height
    cap = np.pi * radius * radius
    areas = np.array([lateral, cap, cap])
    part = rng.choice(3, size=n, p=areas / areas.sum())
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    u = rng.uniform(0.0, 1.0, size=n)
    pts = np.empty((n, 3))
    m = part == 0
    pts[m, 0] = radius * np.cos(theta[m])
    pts[m, 1] = radius * np.sin(theta[m])
    pts[m, 2] = (u[m] - 0.5) * height
    for p, zs in ((1, 0.5), (2, -0.5)):
        m = part == p
        rho = radius * np.sqrt(u[m])  # sqrt for uniform density on the disc
        pts[m, 0] = rho * np.cos(theta[m])
        pts[m, 1] = rho * np.sin(theta[m])
        pts[m, 2] = zs * height
    return pts


def _sample_bicycle(rng: np.random.Generator, n: int) -> np.ndarray:
    """Two wheel circles in the x-z plane joined by a bar between the hubs."""
    wheel = 2.0 * np.pi * WHEEL_RADIUS
    lengths = np.array([wheel, wheel, FRAME_LENGTH])
    part = rng.choice(3, size=n, p=lengths / lengths.sum())
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    u = rng.uniform(-0.5, 0.5, size=n)
    pts = np.zeros((n, 3))
    for p, cx in ((0, -0.5 * FRAME_LENGTH), (1, 0.5 * FRAME_LENGTH)):
        m = part == p
        pts[m, 0] = cx + WHEEL_RADIUS * np.cos(theta[m])
        pts[m, 2] = WHEEL_RADIUS * np.sin(theta[m])
    m = part == 2
    pts[m, 0] = u[m] * FRAME_LENGTH
    return pts


def generate_object(label, rng_seed: int, points_per_object: int,
                    noise_sigma: float = 0.02, centroid_jitter: float = 0.5) -> LabeledCloud:
    """Sample one posed, noisy object cloud.  Deterministic per
    (label, seed, n); noise_sigma and centroid_jitter have hardened-variant
    overrides but default to the standard generator."""
    idx = class_index(label)
    n = int(points_per_object)
    if n < 8:
        raise ValueError(f"points_per_object must be >= 8, got {n}")
    if noise_sigma < 0 or centroid_jitter < 0:
        raise ValueError("noise_sigma and centroid_jitter must be >= 0")
    rng = np.random.default_rng(rng_seed)
    if idx == 0:
        pts = _sample_box(rng, n, CAR_SIZE)
    elif idx == 1:
        pts = _sample_box(rng, n, TRUCK_SIZE)
    elif idx == 2:
        pts = _sample_cylinder(rng, n, PERSON_RADIUS, PERSON_HEIGHT)
    else:
        pts = _sample_bicycle(rng, n)
    yaw = rng.uniform(0.0, 2.0 * np.pi)
    jitter = rng.uniform(-centroid_jitter, centroid_jitter, size=3)
    noise = rng.normal(0.0, noise_sigma, size=(n, 3))
    posed = pts @ _rot_z(yaw).T + noise + jitter
    return LabeledCloud(posed, idx)


def synthesize_set(samples_per_class: int, rng_seed: int,
                   points_range: tuple[int, int] = (128, 512),
                   noise_sigma: float = 0.02, centroid_jitter: float = 0.5) -> list[LabeledCloud]:
    """Class-major list of generated objects with per-object forked seeds and
    per-object sizes drawn from points_range (inclusive)."""
    lo, hi = int(points_range[0]), int(points_range[1])
    if samples_per_class < 1:
        raise ValueError(f"samples_per_class must be >= 1, got {samples_per_class}")
    if not 8 <= lo <= hi:
        raise ValueError(f"bad points_range {points_range}")
    size_rng = np.random.default_rng(fork_seed(rng_seed, "sizes"))
    sizes = size_rng.integers(lo, hi + 1, size=(NUM_CLASSES, samples_per_class))
    out = []
    for c in range(NUM_CLASSES):
        for i in range(samples_per_class):
            out.append(generate_object(c, fork_seed(rng_seed, "object", c, i),
                                       int(sizes[c, i]), noise_sigma, centroid_jitter))
    return out


def extract_object_clouds(scene, boxes) -> tuple[list[LabeledCloud], list[int]]:
    """Cut annotated boxes out of a scene.

    Each captured object is expressed in its box's local frame (centered,
    yaw-aligned) so downstream classification cannot key on absolute scene
    position.  Returns (objects, indices of boxes that captured nothing).
    """
    pts = as_cloud(scene)
    objects: list[LabeledCloud] = []
    skipped: list[int] = []
    for bi, box in enumerate(boxes):
        rot = _rot_z(box.yaw)
        local = (pts - np.asarray(box.center, dtype=np.float64)) @ rot
        half = np.asarray(box.size, dtype=np.float64) / 2.0
        inside = np.all(np.abs(local) <= half, axis=1)
        if not inside.any():
            skipped.append(bi)
            continue
        objects.append(LabeledCloud(local[inside], box.label))
    return objects, skipped


def balance_classes(data, rng_seed: int) -> list[LabeledCloud]:
    """Upsample every present class to the maximum class count by drawing
    existing members with replacement (duplicates diverge later under
    resample jitter)."""
    if len(data) == 0:
        raise ValueError("cannot balance an empty dataset")
    by_class: dict[int, list[int]] = {}
    for i, lc in enumerate(data):
        by_class.setdefault(lc.label, []).append(i)
    target = max(len(v) for v in by_class.values())
    rng = np.random.default_rng(rng_seed)
    out = list(data)
    for c in sorted(by_class):
        idx = by_class[c]
        deficit = target - len(idx)
        if deficit > 0:
            for j in rng.choice(len(idx), size=deficit, replace=True):
                out.append(data[idx[j]])
    return out


def train_test_split(data, test_fraction: float, rng_seed: int):
    """Stratified split; each class's test share is within one sample of
    test_fraction.  Output order follows the input order."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    by_class: dict[int, list[int]] = {}
    for i, lc in enumerate(data):
        by_class.setdefault(lc.label, []).append(i)
    for c, idx in sorted(by_class.items()):
        if len(idx) < 2:
            raise ValueError(f"class {CLASS_NAMES[c]} has {len(idx)} sample(s), need >= 2 to split")
    rng = np.random.default_rng(rng_seed)
    test_idx = set()
    for c in sorted(by_class):
        idx = by_class[c]
        take = int(round(len(idx) * test_fraction))
        take = min(max(take, 1), len(idx) - 1)
        perm = rng.permutation(len(idx))
        test_idx.update(idx[j] for j in perm[:take])
    train = [data[i] for i in range(len(data)) if i not in test_idx]
    test = [data[i] for i in range(len(data)) if i in test_idx]
    return train, test


def save_cloud(points, path, label: int | None = None) -> None:
    """Write the text format: one `x y z` line per point, shortest
    round-trip float repr, optional `# label <int>` header, LF endings."""
    pts = as_cloud(points)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        if label is not None:
            f.write(f"# label {class_index(label)}\n")
        for x, y, z in pts:
            f.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")


def read_cloud_file(path) -> tuple[np.ndarray, int | None]:
    """Parse a cloud file into (points, label or None).  Malformed content
    is rejected with the offending line number."""
    label = None
    rows = []
    with open(path, encoding="ascii") as f:
        for ln, line in enumerate(f, 1):
            s = line.rstrip("\n")
            if ln == 1 and s.startswith("#"):
                fields = s[1:].split()
                if len(fields) != 2 or fields[0] != "label":
                    raise ValueError(f"{path}: line 1: malformed header {s!r}")
                label = class_index(int(fields[1]))
                continue
            fields = s.split(" ")
            if len(fields) != 3 or "" in fields:
                raise ValueError(f"{path}: line {ln}: expected 3 space-separated floats, got {s!r}")
            try:
                row = [float(v) for v in fields]
            except ValueError:
                raise ValueError(f"{path}: line {ln}: unparseable float in {s!r}") from None
            if not all(np.isfinite(row)):
                raise ValueError(f"{path}: line {ln}: non-finite coordinate in {s!r}")
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty cloud file")
    return np.array(rows, dtype=np.float64), label


def load_cloud(path) -> np.ndarray:
    return read_cloud_file(path)[0]


def load_labeled_cloud(path) -> LabeledCloud:
    pts, label = read_cloud_file(path)
    if label is None:
        raise ValueError(f"{path}: missing `# label <int>` header")
    return LabeledCloud(pts, label)


def write_manifest(paths, manifest_path) -> None:
    with open(manifest_path, "w", encoding="ascii", newline="\n") as f:
        for p in paths:
            f.write(f"{p}\n")


def read_manifest(manifest_path) -> list[str]:
    base = Path(manifest_path)
    if not base.is_file():
        raise ValueError(f"manifest not found: {manifest_path}")
    out = []
    with open(base, encoding="ascii") as f:
        for line in f:
            s = line.strip()
            if s:
                out.append(s)
    if not out:
        raise ValueError(f"{manifest_path}: empty manifest")
    return out
