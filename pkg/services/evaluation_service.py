import logging
from typing import List, Optional, Sequence

import numpy as np

from core.errors import ConfigurationError
from models.report import EvalRecord, EvalReport
from network import metrics
from network.freqdino import FreqDino
from services.dataset_service import SplitData

logger = logging.getLogger(__name__)


class EvaluationService:
    """Scores predicted masks against ground truth"""

    def __init__(self, spacing: float = 1.0, batch_size: int = 16):
        self.spacing = spacing
        self.batch_size = batch_size

    def score(self, sample_id: str, pred: np.ndarray, gt: np.ndarray) -> EvalRecord:
        hd, sentinel = metrics.hausdorff(pred, gt, self.spacing)
        hd95, _ = metrics.hausdorff95(pred, gt, self.spacing)
        return EvalRecord(
            sample_id=sample_id,
            dice=metrics.dice(pred, gt),
            miou=metrics.miou(pred, gt),
            hd=hd,
            hd95=hd95,
            hd_sentinel=sentinel
        )

    def aggregate(
        self,
        split: str,
        records: List[EvalRecord],
        gts: Optional[Sequence[np.ndarray]] = None,
        config_hash: Optional[str] = None
    ) -> EvalReport:
        if not records:
            raise ConfigurationError("cannot aggregate an empty evaluation")
        baseline = None
        if gts is not None:
            baseline = float(np.mean([metrics.dice(np.ones_like(gt), gt) for gt in gts]))
        return EvalReport(
            split=split,
            count=len(records),
            dice=float(np.mean([r.dice for r in records])),
            miou=float(np.mean([r.miou for r in records])),
            hd=float(np.mean([r.hd for r in records])),
            hd95=float(np.mean([r.hd95 for r in records])),
            sentinel_count=sum(r.hd_sentinel for r in records),
            trivial_baseline_dice=baseline,
            config_hash=config_hash,
            records=records
        )

    def evaluate_masks(
        self,
        split: str,
        ids: Sequence[str],
        preds: Sequence[np.ndarray],
        gts: Sequence[np.ndarray]
    ) -> EvalReport:
        records = [self.score(i, p, g) for i, p, g in zip(ids, preds, gts)]
        return self.aggregate(split, records, gts)

    def predict_masks(self, model: FreqDino, images: np.ndarray) -> np.ndarray:
        """Binarized mask predictions, shape (N, H, W)"""
        outputs = []
        for start in range(0, images.shape[0], self.batch_size):
            prediction = model.predict(images[start:start + self.batch_size])
            outputs.append(metrics.binarize(prediction.mask_probability[:, 0]))
        return np.concatenate(outputs)

    def evaluate(self, model: FreqDino, data: SplitData, split: str = "test") -> EvalReport:
        expected = model.config.image_size
        if data.images.shape[2:] != (expected, expected):
            raise ConfigurationError(
                f"split images are {data.images.shape[2]}x{data.images.shape[3]}, "
                f"checkpoint was trained at {expected}x{expected}"
            )
        preds = self.predict_masks(model, data.images)
        gts = data.masks[:, 0]
        records = [self.score(i, p, g) for i, p, g in zip(data.ids, preds, gts)]
        report = self.aggregate(split, records, gts, model.config.config_hash())
        logger.info(
            "evaluated %s n=%d dice=%.4f miou=%.4f hd=%.2f (trivial dice %.4f)",
            split, report.count, report.dice, report.miou, report.hd, report.trivial_baseline_dice
        )
        return report
