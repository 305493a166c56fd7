import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.config import RunConfig
from models.report import AblationReport, AblationRow
from services.dataset_service import SplitData
from services.evaluation_service import EvaluationService
from services.training_service import TrainingService

logger = logging.getLogger(__name__)

# (name, use_mfea, use_fgbr, use_mbgd), in reporting order
ABLATION_ROWS: Tuple[Tuple[str, bool, bool, bool], ...] = (
    ("baseline", False, False, False),
    ("+MFEA", True, False, False),
    ("+MFEA+FGBR", True, True, False),
    ("full", True, True, True),
)


def row_configs(config: RunConfig, seed: int) -> List[Tuple[str, RunConfig]]:
    return [
        (name, config.with_overrides(use_mfea=mfea, use_fgbr=fgbr, use_mbgd=mbgd, seed=seed))
        for name, mfea, fgbr, mbgd in ABLATION_ROWS
    ]


class AblationService:
    """Trains the four module combinations on one shared dataset and compares them"""

    def __init__(self, config: RunConfig, seeds: Optional[Sequence[int]] = None, progress: bool = False):
        self.config = config
        self.seeds = list(seeds) if seeds else [config.seed]
        self.progress = progress

    def run(self, train: SplitData, test: SplitData, val: Optional[SplitData] = None,
            dataset: str = "") -> AblationReport:
        scores: Dict[str, List[Tuple[float, float, float]]] = {name: [] for name, *_ in ABLATION_ROWS}
        hashes: Dict[str, List[str]] = {name: [] for name, *_ in ABLATION_ROWS}
        for seed in self.seeds:
            for name, config in row_configs(self.config, seed):
                result = TrainingService(config, progress=self.progress).fit(train, val)
                evaluator = EvaluationService(spacing=config.hd_spacing, batch_size=config.batch_size)
                report = evaluator.evaluate(result.model, test)
                scores[name].append((report.dice, report.miou, report.hd))
                hashes[name].append(config.config_hash())
                logger.info("ablation seed=%d row=%s dice=%.4f", seed, name, report.dice)

        rows = []
        for name, mfea, fgbr, mbgd in ABLATION_ROWS:
            values = np.array(scores[name])
            rows.append(AblationRow(
                name=name,
                toggles={"mfea": mfea, "fgbr": fgbr, "mbgd": mbgd},
                config_hashes=hashes[name],
                seeds=self.seeds,
                dice=float(values[:, 0].mean()),
                miou=float(values[:, 1].mean()),
                hd=float(values[:, 2].mean()),
                per_seed_dice=[float(v) for v in values[:, 0]]
            ))
        baseline = rows[0]
        for row in rows:
            row.delta_dice = row.dice - baseline.dice
            row.delta_miou = row.miou - baseline.miou
            row.delta_hd = row.hd - baseline.hd
        return AblationReport(rows=rows, dataset=dataset, seeds=self.seeds)
