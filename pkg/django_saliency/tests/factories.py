"""
Synthetic images, fixation files and small corpora for the test suite.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from django_saliency.core import FixationRecord, FixationSet, RgbImage
from django_saliency.dataset import write_channel_map, write_fixations
from django_saliency.sift import sift_channel


def blob(size, center, sigma, amplitude=1.0, background=0.0):
    """A (size x size) plane holding one Gaussian blob at (x, y) ``center``."""
    height, width = (size, size) if np.isscalar(size) else size
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx, cy = center
    plane = amplitude * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma))
    return background + plane


def gray(plane) -> RgbImage:
    plane = np.clip(np.asarray(plane, dtype=np.float64), 0.0, 1.0)
    return RgbImage(np.repeat(plane[..., None], 3, axis=2))


def quantized(pixels) -> np.ndarray:
    """Round to 8 bits the way a PNG round trip does."""
    return np.rint(np.clip(pixels, 0.0, 1.0) * 255.0) / 255.0


def smooth_texture(rng: np.random.Generator, size: int, sigma: float = 3.0) -> np.ndarray:
    noise = ndimage.gaussian_filter(rng.random((size, size)), sigma, mode="reflect")
    lo, hi = noise.min(), noise.max()
    return 0.15 + 0.7 * (noise - lo) / (hi - lo)


def blob_scene(rng: np.random.Generator, size: int = 80, blobs: int = 3):
    """RGB pixels with a few bright blobs on a dim gradient, plus the blob centres."""
    plane = np.linspace(0.05, 0.2, size)[None, :].repeat(size, axis=0)
    centers = []
    for _ in range(blobs):
        cx, cy = rng.uniform(0.25 * size, 0.75 * size, size=2)
        centers.append((float(cx), float(cy)))
        plane = plane + blob(size, (cx, cy), rng.uniform(2.5, 4.0), amplitude=0.6)
    tint = np.array([1.0, 0.85, 0.7])
    return np.clip(plane[..., None] * tint, 0.0, 1.0), centers


def write_png(pixels, path: Path) -> Path:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[..., None], 3, axis=2)
    data = np.rint(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")
    return path


def fixations_near(rng, image_id, points, width, height, observers=4, spread=1.5) -> FixationSet:
    """Each observer looks once at every point, jittered and kept inside the image."""
    records = []
    for observer in range(1, observers + 1):
        for x, y in points:
            fx = float(np.clip(x + rng.normal(0.0, spread), 0.0, width - 1.0))
            fy = float(np.clip(y + rng.normal(0.0, spread), 0.0, height - 1.0))
            records.append(FixationRecord(observer, fx, fy))
    return FixationSet(image_id=image_id, records=tuple(records))


def write_manifest(path: Path, rows, detectors: bool = False) -> Path:
    header = ["image_id", "image_path", "fixation_path"]
    if detectors:
        header += ["face_path", "person_path", "car_path"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def make_corpus(root: Path, count: int = 3, size: int = 80, seed: int = 0, with_face: bool = False) -> Path:
    """
    Write ``count`` blob scenes with fixations on their blobs and return the
    manifest path. With ``with_face`` each image also gets a face map with a
    box around its first blob.
    """
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "fixations").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        image_id = f"img{i:03d}"
        pixels, centers = blob_scene(rng, size)
        write_png(pixels, root / "images" / f"{image_id}.png")
        write_fixations(
            fixations_near(rng, image_id, centers, size, size),
            root / "fixations" / f"{image_id}.csv",
        )
        row = [image_id, f"images/{image_id}.png", f"fixations/{image_id}.csv"]
        if with_face:
            (root / "detectors").mkdir(exist_ok=True)
            face = np.zeros((size, size))
            cx, cy = (int(round(v)) for v in centers[0])
            face[max(cy - 5, 0) : cy + 6, max(cx - 5, 0) : cx + 6] = 1.0
            write_channel_map(face, root / "detectors" / f"{image_id}_face.chan")
            row += [f"detectors/{image_id}_face.chan", "", ""]
        rows.append(row)
    return write_manifest(root / "manifest.csv", rows, detectors=with_face)


def make_keypoint_corpus(root: Path, count: int = 60, size: int = 96, seed: int = 0) -> Path:
    """
    Smooth-noise textures whose fixations sit on the texture's own SIFT
    keypoints, plus one look at the image centre. Only the keypoint density
    channel sees exactly where observers looked.
    """
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "fixations").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    centre = (size - 1) / 2.0
    for i in range(count):
        image_id = f"tex{i:03d}"
        pixels = quantized(np.repeat(smooth_texture(rng, size)[..., None], 3, axis=2))
        write_png(pixels, root / "images" / f"{image_id}.png")

        _density, keypoints = sift_channel(RgbImage(pixels).luma())
        records = [FixationRecord(1, kp.x, kp.y) for kp in keypoints]
        records.append(FixationRecord(2, centre, centre))
        write_fixations(FixationSet(image_id, tuple(records)), root / "fixations" / f"{image_id}.csv")
        rows.append([image_id, f"images/{image_id}.png", f"fixations/{image_id}.csv"])
    return write_manifest(root / "manifest.csv", rows)


def separable_blobs(rng, n_per_class: int = 50, dims: int = 2, distance: float = 4.0):
    pos = rng.normal(0.0, 0.5, size=(n_per_class, dims)) + distance / 2.0
    neg = rng.normal(0.0, 0.5, size=(n_per_class, dims)) - distance / 2.0
    matrix = np.vstack([pos, neg])
    labels = np.array([1] * n_per_class + [-1] * n_per_class)
    return matrix, labels


def noisy_blobs(rng, n: int = 400, dims: int = 2, flip: float = 0.1):
    half = n // 2
    matrix, labels = separable_blobs(rng, half, dims, distance=2.0)
    flipped = rng.random(len(labels)) < flip
    labels = np.where(flipped, -labels, labels)
    return matrix, labels


def random_features(rng, n: int, dims: int = 34):
    matrix = rng.random((n, dims))
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    labels[0], labels[1] = 1, -1
    return matrix, labels


def write_config(path: Path, **values) -> Path:
    lines = [f"{key} = {value}" for key, value in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
