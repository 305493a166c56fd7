import json
import logging
from pathlib import Path
from typing import Iterable, List, Type, TypeVar, Union

from pydantic import BaseModel

from models.report import AblationReport, EvalReport

logger = logging.getLogger(__name__)

Record = TypeVar("Record", bound=BaseModel)


class ReportService:
    """Newline-delimited JSON records in declared field order, plus Markdown summaries"""

    def to_line(self, record: BaseModel) -> str:
        return json.dumps(record.model_dump(mode="json"))

    def write_jsonl(self, path: Union[str, Path], records: Iterable[BaseModel]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(self.to_line(record) + "\n" for record in records))
        return path

    def append_jsonl(self, path: Union[str, Path], record: BaseModel) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a") as handle:
            handle.write(self.to_line(record) + "\n")

    def read_jsonl(self, path: Union[str, Path], model: Type[Record]) -> List[Record]:
        lines = Path(path).read_text().splitlines()
        return [model.model_validate_json(line) for line in lines if line.strip()]

    def write_evaluation(self, path: Union[str, Path], report: EvalReport) -> Path:
        """Per-image records followed by one aggregate line (records omitted)"""
        aggregate = report.model_copy(update={"records": []})
        path = self.write_jsonl(path, list(report.records) + [aggregate])
        logger.info("wrote evaluation report %s", path)
        return path

    def write_ablation(self, path: Union[str, Path], report: AblationReport) -> Path:
        path = self.write_jsonl(path, report.rows)
        summary_path = Path(path).with_suffix(".md")
        summary_path.write_text(self.ablation_summary(report))
        logger.info("wrote ablation report %s and %s", path, summary_path)
        return path

    def ablation_summary(self, report: AblationReport) -> str:
        lines = [
            "# Ablation Summary",
            "",
            f"- **Dataset**: {report.dataset}",
            f"- **Seeds**: {', '.join(str(s) for s in report.seeds)}",
            "",
            "| Row | MFEA | FGBR | MBGD | Dice | mIoU | HD | dDice | dmIoU | dHD |",
            "|---|---|---|---|---|---|---|---|---|---|",
        ]
        mark = {True: "x", False: ""}
        for row in report.rows:
            lines.append(
                f"| {row.name} | {mark[row.toggles['mfea']]} | {mark[row.toggles['fgbr']]} | "
                f"{mark[row.toggles['mbgd']]} | {row.dice:.4f} | {row.miou:.4f} | {row.hd:.2f} | "
                f"{row.delta_dice:+.4f} | {row.delta_miou:+.4f} | {row.delta_hd:+.2f} |"
            )
        lines += ["", "Deltas are relative to the baseline row."]
        return "\n".join(lines) + "\n"
