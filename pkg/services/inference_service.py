import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from core.tensor_io import dump_tensor
from network import metrics
from network.freqdino import FreqDino, Inspection
from services.image_io import normalize_for_display, read_image, write_image, write_mask

logger = logging.getLogger(__name__)

BAND_NAMES = ("ll", "lh", "hl", "hh")


@dataclass
class InferenceResult:
    mask: np.ndarray
    mask_probability: np.ndarray
    boundary: Optional[np.ndarray] = None
    boundary_probability: Optional[np.ndarray] = None
    prototype: Optional[np.ndarray] = None
    written: List[Path] = field(default_factory=list)

    @property
    def foreground_fraction(self) -> float:
        return float(self.mask.mean())

    @property
    def boundary_fraction(self) -> Optional[float]:
        return None if self.boundary is None else float(self.boundary.mean())


class InferenceService:
    """Runs a trained model on single grayscale images"""

    def __init__(self, model: FreqDino):
        self.model = model

    def predict_array(self, image: np.ndarray) -> InferenceResult:
        """image: (H, W) in [0, 1]"""
        inspection = self.model.inspect(image[None, None])
        return self._result(inspection)

    def _result(self, inspection: Inspection) -> InferenceResult:
        prediction = inspection.prediction
        probability = prediction.mask_probability[0, 0]
        result = InferenceResult(mask=metrics.binarize(probability), mask_probability=probability)
        if prediction.boundary_logits is not None:
            result.boundary_probability = prediction.boundary_probability[0, 0]
            result.boundary = metrics.binarize(result.boundary_probability)
        if inspection.prototype is not None:
            result.prototype = inspection.prototype.proto[0]
        return result

    def infer_file(
        self,
        image_path: Union[str, Path],
        output_dir: Union[str, Path],
        probability: bool = False,
        dump_bands: bool = False,
        dump_prototype: bool = False,
        suffix: str = ".pgm"
    ) -> InferenceResult:
        image = read_image(image_path)
        inspection = self.model.inspect(image[None, None])
        result = self._result(inspection)

        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = Path(image_path).stem
        result.written.append(self._mask(out / f"{stem}_mask{suffix}", result.mask))
        if result.boundary is not None:
            result.written.append(self._mask(out / f"{stem}_boundary{suffix}", result.boundary))
        if probability:
            path = out / f"{stem}_prob{suffix}"
            write_image(path, result.mask_probability)
            result.written.append(path)
        if dump_bands:
            result.written.extend(self.dump_inspection(inspection, out, stem, suffix))
        if dump_prototype and result.prototype is not None:
            path = out / f"{stem}_prototype.fqt"
            dump_tensor(result.prototype, path)
            result.written.append(path)
        logger.info("inferred %s -> %s (foreground %.3f)", image_path, out, result.foreground_fraction)
        return result

    @staticmethod
    def _mask(path: Path, mask: np.ndarray) -> Path:
        write_mask(path, mask)
        return path

    def dump_inspection(self, inspection: Inspection, out: Path, stem: str, suffix: str = ".pgm") -> List[Path]:
        """Four channel-averaged bands and two attention maps per scale"""
        written = []
        for scale, view in inspection.scales.items():
            maps: Dict[str, np.ndarray] = {
                name: getattr(view.bands, name)[0].mean(axis=0) for name in BAND_NAMES
            }
            maps["attn_boundary"] = view.attn_boundary[0, 0]
            maps["attn_structure"] = view.attn_structure[0, 0]
            for name, values in maps.items():
                path = out / f"{stem}_{scale}_{name}{suffix}"
                display = values if name.startswith("attn") else normalize_for_display(values)
                write_image(path, display)
                written.append(path)
        if not inspection.scales:
            logger.warning("model has no frequency module; no band dumps written")
        return written
