"""Posterior stability across a set of priors."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass

from .cox import Ties
from .dataset import Dataset
from .inference import InferenceError, Method, PosteriorSummary, SamplerConfig, analyze
from .priors import LogHrPrior

COLUMNS = ("Prior", "Pr(HR > 1)", "Median HR", "2.5%", "97.5%")


class Format(str, enum.Enum):
    PLAIN = "plain"
    CSV = "csv"
    MARKDOWN = "markdown"


def decision(pr: float, threshold: float) -> str:
    """Classify one posterior probability: harm, benefit or inconclusive."""
    if pr > threshold:
        return "harm"
    if pr < 1.0 - threshold:
        return "benefit"
    return "inconclusive"


def spread(values) -> float:
    """Largest pairwise absolute difference (0 for fewer than two values)."""
    values = list(values)
    return max(values) - min(values) if len(values) > 1 else 0.0


@dataclass(frozen=True)
class SensitivityReport:
    rows: tuple[tuple[str, PosteriorSummary], ...]
    decision_threshold: float = 0.95

    @property
    def spread_pr(self) -> float:
        return spread(s.pr_hr_gt_1 for _, s in self.rows)

    @property
    def spread_median(self) -> float:
        return spread(s.median_hr for _, s in self.rows)

    @property
    def unanimous_decision(self) -> bool:
        return len({decision(s.pr_hr_gt_1, self.decision_threshold) for _, s in self.rows}) <= 1

    def subset(self, labels) -> "SensitivityReport":
        keep = set(labels)
        return SensitivityReport(tuple(r for r in self.rows if r[0] in keep), self.decision_threshold)


def run_sensitivity(
    dataset: Dataset,
    priors: list[LogHrPrior],
    ties: Ties = Ties.BRESLOW,
    config: SamplerConfig = SamplerConfig(),
    method: Method = Method.QUADRATURE,
    threshold: float = 0.95,
) -> SensitivityReport:
    if not priors:
        raise ValueError("at least one prior is required")
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    labels = [p.label for p in priors]
    dupes = sorted({x for x in labels if labels.count(x) > 1})
    if dupes:
        raise ValueError(f"duplicate prior labels: {', '.join(dupes)}")
    rows = []
    for prior in priors:
        try:
            rows.append((prior.label, analyze(dataset, prior, ties, method, config)))
        except (InferenceError, ValueError) as exc:
            raise InferenceError(f"prior {prior.label!r}: {exc}") from exc
    return SensitivityReport(tuple(rows), threshold)


def _cells(label: str, s: PosteriorSummary) -> list[str]:
    return [label] + [f"{v:.3f}" for v in (s.pr_hr_gt_1, s.median_hr, s.hr_2_5, s.hr_97_5)]


def render_report(report: SensitivityReport, fmt: Format = Format.PLAIN) -> str:
    body = [_cells(label, s) for label, s in report.rows]
    fmt = Format(fmt)
    if fmt is Format.CSV:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(body)
        return buf.getvalue()
    if fmt is Format.MARKDOWN:
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        return "\n".join(lines) + "\n"
    widths = [max(len(row[i]) for row in [list(COLUMNS), *body]) for i in range(len(COLUMNS))]
    fmt_row = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    lines = [fmt_row(COLUMNS), fmt_row(["-" * w for w in widths])] + [fmt_row(r) for r in body]
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> list[dict]:
    """Read back a CSV report as a list of dicts with float values."""
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: (v if k == "Prior" else float(v)) for k, v in r.items()} for r in rows]
