import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from core.errors import ConfigurationError
from models.config import GeneratorConfig, RunConfig
from models.dataset import DatasetManifest, SampleRecord, Split
from services.image_io import read_image, read_mask, write_image, write_mask

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MAX_ATTEMPTS = 1000


@dataclass(frozen=True)
class SyntheticSample:
    image: np.ndarray
    mask: np.ndarray
    ellipses: int
    blur_sigma: float
    speckle_std: float
    contrast_gap: float

    @property
    def foreground_fraction(self) -> float:
        return float(self.mask.mean())


@dataclass(frozen=True)
class SplitData:
    """Stacked images/masks of one split, shaped (N, 1, H, W)"""
    ids: List[str]
    images: np.ndarray
    masks: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


def ellipse_union(size: int, rng: np.random.Generator, count: int) -> np.ndarray:
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(count):
        cy, cx = rng.uniform(0.2, 0.8, size=2) * size
        ay, ax = rng.uniform(0.08, 0.3, size=2) * size
        theta = rng.uniform(0.0, np.pi)
        dy, dx = rows - cy, cols - cx
        u = dx * np.cos(theta) + dy * np.sin(theta)
        v = -dx * np.sin(theta) + dy * np.cos(theta)
        mask |= (u / ax) ** 2 + (v / ay) ** 2 <= 1.0
    return mask.astype(np.uint8)


def synthesize_sample(size: int, rng: np.random.Generator, recipe: GeneratorConfig) -> SyntheticSample:
    """One ultrasound-like image: blurred low-contrast ellipses under speckle.

    The mask is the unblurred ellipse union; geometry is redrawn until the
    foreground fraction lies strictly inside the recipe bounds.
    """
    for _ in range(MAX_ATTEMPTS):
        count = int(rng.integers(recipe.min_ellipses, recipe.max_ellipses + 1))
        mask = ellipse_union(size, rng, count)
        fraction = mask.mean()
        if recipe.min_fraction < fraction < recipe.max_fraction:
            break
    else:
        raise ConfigurationError(f"could not draw a mask within the foreground bounds at size {size}")

    sigma = float(rng.uniform(*recipe.blur_sigma))
    speckle = float(rng.uniform(*recipe.speckle_std))
    gap = float(rng.uniform(*recipe.contrast_gap))
    background = float(rng.uniform(0.2, 0.5))

    clean = background + gap * mask.astype(np.float64)
    blurred = gaussian_filter(clean, sigma=sigma, mode="nearest")
    noisy = blurred * (1.0 + rng.normal(0.0, speckle, size=blurred.shape))
    return SyntheticSample(
        image=np.clip(noisy, 0.0, 1.0),
        mask=mask,
        ellipses=count,
        blur_sigma=sigma,
        speckle_std=speckle,
        contrast_gap=gap
    )


def split_sizes(n: int, ratios: Tuple[int, int, int]) -> Tuple[int, int, int]:
    """Floor the train/val shares; the remainder goes to test"""
    total = sum(ratios)
    n_train = n * ratios[0] // total
    n_val = n * ratios[1] // total
    return n_train, n_val, n - n_train - n_val


class DatasetService:
    """Generates and loads synthetic image/mask datasets on disk"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def generate(self, n: int, config: RunConfig) -> DatasetManifest:
        """Write n samples plus a manifest; identical seeds give identical bytes"""
        if n < 1:
            raise ConfigurationError(f"dataset size must be >= 1, got {n}")
        recipe = config.generator_config
        (self.root / "images").mkdir(parents=True, exist_ok=True)
        (self.root / "masks").mkdir(parents=True, exist_ok=True)

        sizes = split_sizes(n, (config.split_train, config.split_val, config.split_test))
        order = np.random.default_rng([config.seed, n]).permutation(n)
        labels = np.empty(n, dtype=object)
        labels[order[:sizes[0]]] = Split.TRAIN
        labels[order[sizes[0]:sizes[0] + sizes[1]]] = Split.VAL
        labels[order[sizes[0] + sizes[1]:]] = Split.TEST

        samples = []
        for index in range(n):
            sample = synthesize_sample(config.image_size, np.random.default_rng([config.seed, index]), recipe)
            sample_id = f"{index:05d}"
            image_rel = f"images/{sample_id}.pgm"
            mask_rel = f"masks/{sample_id}.pgm"
            write_image(self.root / image_rel, sample.image)
            write_mask(self.root / mask_rel, sample.mask)
            samples.append(SampleRecord(
                sample_id=sample_id,
                image=image_rel,
                mask=mask_rel,
                split=labels[index],
                ellipses=sample.ellipses,
                blur_sigma=sample.blur_sigma,
                speckle_std=sample.speckle_std,
                contrast_gap=sample.contrast_gap,
                foreground_fraction=sample.foreground_fraction
            ))

        manifest = DatasetManifest(
            seed=config.seed,
            image_size=config.image_size,
            generator=config.generator,
            count=n,
            samples=samples
        )
        self.manifest_path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True))
        logger.info("generated %d samples in %s split=%s", n, self.root, manifest.split_counts())
        return manifest

    def load_manifest(self) -> DatasetManifest:
        if not self.manifest_path.is_file():
            raise FileNotFoundError(f"no dataset manifest at {self.manifest_path}")
        return DatasetManifest.model_validate_json(self.manifest_path.read_text())

    def load_split(self, split: Split) -> SplitData:
        manifest = self.load_manifest()
        records = manifest.split(split)
        if not records:
            raise ConfigurationError(f"split {split.value!r} of {self.root} is empty")
        images = np.stack([read_image(self.root / r.image) for r in records])[:, None]
        masks = np.stack([read_mask(self.root / r.mask) for r in records])[:, None]
        return SplitData(ids=[r.sample_id for r in records], images=images, masks=masks)
