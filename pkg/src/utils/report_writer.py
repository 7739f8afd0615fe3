"""
Run Report Generator

Formats experiment results (metric blocks and per-holdout tables) into a
plain-text report next to the JSON artifacts.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

WIDTH = 90


@dataclass
class ExperimentResult:
    """One block of the report: a named experiment and its numbers."""

    name: str
    description: str
    metrics: Dict[str, Any] = field(default_factory=dict)
    table: List[Dict[str, Any]] = field(default_factory=list)
    status: str = "OK"
    notes: Optional[str] = None


class RunReporter:
    """Collects experiment results and renders report.txt."""

    def __init__(self, title: str, config_hash: str = ""):
        self.title = title
        self.config_hash = config_hash
        self.experiments: List[ExperimentResult] = []

    def add_experiment(self, experiment: ExperimentResult) -> None:
        self.experiments.append(experiment)

    def render(self) -> str:
        lines: List[str] = []
        lines.append("=" * WIDTH)
        lines.append(self.title.upper())
        lines.append("=" * WIDTH)
        if self.config_hash:
            lines.append(f"Config hash: {self.config_hash}")
        lines.append(f"Experiments: {len(self.experiments)}")
        lines.append("")

        lines.append("-" * WIDTH)
        lines.append("SUMMARY")
        lines.append("-" * WIDTH)
        for i, experiment in enumerate(self.experiments, 1):
            lines.append(f"  {i}. [{experiment.status}] {experiment.name}")
        lines.append("")
        lines.append("=" * WIDTH)
        lines.append("")

        for i, experiment in enumerate(self.experiments, 1):
            lines.extend(self._format_experiment(experiment, i))

        lines.append("=" * WIDTH)
        lines.append("END OF REPORT")
        lines.append("=" * WIDTH)
        return "\n".join(lines) + "\n"

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(), encoding="utf-8")
        return path

    def _format_experiment(self, experiment: ExperimentResult, number: int) -> List[str]:
        lines = []
        lines.append("-" * WIDTH)
        lines.append(f"EXPERIMENT {number}: {experiment.name}")
        lines.append("-" * WIDTH)
        lines.append(f"Status:      {experiment.status}")
        lines.append(f"Description: {experiment.description}")
        lines.append("")

        if experiment.metrics:
            lines.append("  METRICS:")
            for key in sorted(experiment.metrics):
                lines.append(f"    {key:<28} {self._format_value(experiment.metrics[key])}")
            lines.append("")

        if experiment.table:
            lines.extend(self._format_table(experiment.table))
            lines.append("")

        if experiment.notes:
            lines.append(f"  NOTES: {experiment.notes}")
            lines.append("")
        return lines

    def _format_table(self, rows: Sequence[Dict[str, Any]]) -> List[str]:
        columns = list(rows[0].keys())
        cells = [[self._format_value(row.get(column, "")) for column in columns] for row in rows]
        widths = [
            max(len(column), *(len(row[i]) for row in cells)) for i, column in enumerate(columns)
        ]
        lines = ["  " + "  ".join(c.ljust(w) for c, w in zip(columns, widths))]
        lines.append("  " + "  ".join("-" * w for w in widths))
        for row in cells:
            lines.append("  " + "  ".join(c.ljust(w) for c, w in zip(row, widths)))
        return lines

    def _format_value(self, value: Any) -> str:
        if isinstance(value, float):
            return f"{value:.4f}"
        if isinstance(value, (dict, list)):
            return json.dumps(value, sort_keys=True, default=str)
        if value is None:
            return "-"
        return str(value)
