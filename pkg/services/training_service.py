import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from tqdm import tqdm

from core.optimizer import Adam
from models.config import RunConfig
from models.report import EpochRecord
from network import metrics
from network.freqdino import FreqDino
from network.supervision import MultiTaskLoss
from services.checkpoint_service import CheckpointService
from services.dataset_service import SplitData
from services.evaluation_service import EvaluationService
from services.report_service import ReportService

logger = logging.getLogger(__name__)

LAST_CHECKPOINT = "last.ckpt"
BEST_CHECKPOINT = "best.ckpt"
TRAIN_LOG = "train_log.jsonl"


@dataclass
class TrainingResult:
    model: FreqDino
    optimizer: Adam
    history: List[EpochRecord] = field(default_factory=list)
    best_val_dice: Optional[float] = None

    @property
    def final_loss(self) -> Optional[float]:
        return self.history[-1].total_loss if self.history else None


class TrainingService:
    """End-to-end training of every trainable parameter with Adam"""

    def __init__(
        self,
        config: RunConfig,
        output_dir: Optional[Union[str, Path]] = None,
        checkpoints: Optional[CheckpointService] = None,
        reports: Optional[ReportService] = None,
        progress: bool = True
    ):
        self.config = config
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.checkpoints = checkpoints or CheckpointService()
        self.reports = reports or ReportService()
        self.progress = progress
        self.evaluator = EvaluationService(spacing=config.hd_spacing, batch_size=config.batch_size)

    def batch_order(self, n: int, epoch: int) -> np.ndarray:
        """Sample order of one epoch; a pure function of (seed, epoch)"""
        return np.random.default_rng([self.config.seed, epoch]).permutation(n)

    def _start(self, resume: bool):
        last = self.output_dir / LAST_CHECKPOINT if self.output_dir is not None else None
        if resume and last is not None and last.is_file():
            model, optimizer, manifest = self.checkpoints.restore(last, with_optimizer=True)
            if manifest.config_hash != self.config.config_hash():
                logger.warning("resuming %s with a different configuration hash", last)
            logger.info("resuming from epoch %d", manifest.epoch)
            return model, optimizer, manifest.epoch, manifest.best_val_dice
        model = FreqDino(self.config)
        return model, Adam(model.store, self.config.adam), 0, None

    def run_epoch(
        self,
        model: FreqDino,
        optimizer: Adam,
        loss: MultiTaskLoss,
        data: SplitData,
        epoch: int
    ) -> EpochRecord:
        optimizer.set_epoch(epoch)
        order = self.batch_order(len(data), epoch)
        totals, masks, boundaries, weights = [], [], [], []
        for start in range(0, len(order), self.config.batch_size):
            index = np.sort(order[start:start + self.config.batch_size])
            prediction = model.forward(data.images[index])
            breakdown = loss.forward(prediction, data.masks[index])
            model.backward(*loss.backward())
            optimizer.step()
            totals.append(breakdown.total)
            masks.append(breakdown.mask)
            boundaries.append(breakdown.boundary)
            weights.append(len(index))
        return EpochRecord(
            epoch=epoch,
            lr=optimizer.lr,
            total_loss=float(np.average(totals, weights=weights)),
            mask_loss=float(np.average(masks, weights=weights)),
            boundary_loss=float(np.average(boundaries, weights=weights))
        )

    def validation_dice(self, model: FreqDino, data: SplitData) -> float:
        preds = self.evaluator.predict_masks(model, data.images)
        return float(np.mean([metrics.dice(p, g) for p, g in zip(preds, data.masks[:, 0])]))

    def fit(self, train: SplitData, val: Optional[SplitData] = None, resume: bool = False) -> TrainingResult:
        model, optimizer, first_epoch, best = self._start(resume)
        loss = MultiTaskLoss(self.config.loss)
        result = TrainingResult(model=model, optimizer=optimizer, best_val_dice=best)
        logger.info(
            "training %s on %d samples for %d epochs (trainable=%d of %d)",
            self.config.toggles(), len(train), self.config.epochs,
            model.store.count(trainable=True), model.store.count()
        )

        epochs = range(first_epoch, self.config.epochs)
        for epoch in tqdm(epochs, desc="train", disable=not self.progress):
            record = self.run_epoch(model, optimizer, loss, train, epoch)
            if val is not None and len(val):
                record.val_dice = self.validation_dice(model, val)
                if result.best_val_dice is None or record.val_dice > result.best_val_dice:
                    result.best_val_dice = record.val_dice
                    record.best = True
            result.history.append(record)
            logger.info(
                "epoch %d lr=%.3g loss=%.5f mask=%.5f boundary=%.5f val_dice=%s",
                record.epoch, record.lr, record.total_loss, record.mask_loss, record.boundary_loss,
                "-" if record.val_dice is None else f"{record.val_dice:.4f}"
            )
            self._persist(result, record)
        return result

    def _persist(self, result: TrainingResult, record: EpochRecord) -> None:
        if self.output_dir is None:
            return
        self.reports.append_jsonl(self.output_dir / TRAIN_LOG, record)
        completed = record.epoch + 1
        self.checkpoints.save(
            self.output_dir / LAST_CHECKPOINT, result.model, result.optimizer, completed, result.best_val_dice
        )
        if record.best or (record.val_dice is None and completed == self.config.epochs):
            self.checkpoints.save(
                self.output_dir / BEST_CHECKPOINT, result.model, None, completed, result.best_val_dice
            )
