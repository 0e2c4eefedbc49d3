"""Judging and aggregation of candidate outcomes against ground truth.

An instance counts as correct when the feasibility status matches ground
truth and (for feasible pairs) the relative objective error clears the
tier's tolerance.  Two silent-failure metrics are reported side by side
because both are in circulation: the gap (Exec% minus Acc%, percentage
points) and the rate (gap divided by Exec%, a fraction of seemingly
successful runs).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import EmptySuite, UnknownBenchmark

STRICT = "strict"
PRACTICAL = "practical"

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"

FAMILIES = ("F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8")

# Retail tiers; the discrete-logistics family keeps the loose tolerance at
# both tiers because its MIPs may stop at the 1% solver gap.
_RETAIL_TOLERANCES = {STRICT: 1e-4, PRACTICAL: 1e-2}
_RETAIL_MIP_FAMILY = "F6"
_EXTERNAL_TOLERANCE = 1e-6

_BENCHMARKS = {"retail", "mamo", "mamo-complexlp", "industryor"}

ZERO_REF_EPS = 1e-9


@dataclass
class EvalRecord:
    instance: str
    family: str
    executed: bool
    pred_status: str | None
    y_pred: float | None
    gt_status: str
    y_ref: float | None
    rel_err: float | None
    correct_strict: bool
    correct_practical: bool

    def to_json_dict(self) -> dict[str, Any]:
        return asdict(self)


def tolerance_for(benchmark: str, family: str | None, tier: str, *,
                  mip_tolerance_override: float | None = None) -> float:
    """Tolerance epsilon for (benchmark, family, tier).

    Retail: strict 1e-4 / practical 1e-2, except the MIP family F6 at 1e-2
    for both tiers (overridable).  External benchmarks use 1e-6 regardless.
    """
    name = benchmark.strip().lower()
    if name not in _BENCHMARKS:
        raise UnknownBenchmark(benchmark)
    if tier not in (STRICT, PRACTICAL):
        raise ValueError(f"unknown tier {tier!r}")
    if name.startswith("retail"):
        if family == _RETAIL_MIP_FAMILY:
            return mip_tolerance_override if mip_tolerance_override is not None else 1e-2
        return _RETAIL_TOLERANCES[tier]
    return _EXTERNAL_TOLERANCE


def relative_error(y_pred: float, y_ref: float) -> float:
    """|y_pred - y_ref| / |y_ref|; absolute error when the reference is ~0."""
    if abs(y_ref) < ZERO_REF_EPS:
        return abs(y_pred - y_ref)
    return abs(y_pred - y_ref) / abs(y_ref)


def judge(
    pred_status: str | None,
    y_pred: float | None,
    gt_status: str,
    y_ref: float | None,
    eps: float,
) -> bool:
    """True iff status matches and, for feasible pairs, rel. error < eps."""
    gt_feasible = gt_status != INFEASIBLE
    if pred_status == INFEASIBLE and not gt_feasible:
        return True
    if pred_status != FEASIBLE or not gt_feasible:
        return False
    if y_pred is None or y_ref is None:
        return False
    return relative_error(y_pred, y_ref) < eps


def normalize_pred_status(status_code: int | None, objective: float | None) -> str | None:
    """Candidate contract integers to judge-side statuses."""
    if status_code == 2 and objective is not None:
        return FEASIBLE
    if status_code == 3:
        return INFEASIBLE
    return None


def build_record(
    instance: str,
    family: str,
    benchmark: str,
    *,
    executed: bool,
    pred_status: str | None,
    y_pred: float | None,
    gt_status: str,
    y_ref: float | None,
    mip_tolerance_override: float | None = None,
) -> EvalRecord:
    rel = None
    if y_pred is not None and y_ref is not None:
        rel = relative_error(y_pred, y_ref)
    eps_strict = tolerance_for(benchmark, family, STRICT,
                               mip_tolerance_override=mip_tolerance_override)
    eps_practical = tolerance_for(benchmark, family, PRACTICAL,
                                  mip_tolerance_override=mip_tolerance_override)
    return EvalRecord(
        instance=instance,
        family=family,
        executed=executed,
        pred_status=pred_status,
        y_pred=y_pred,
        gt_status=gt_status,
        y_ref=y_ref,
        rel_err=rel,
        correct_strict=judge(pred_status, y_pred, gt_status, y_ref, eps_strict),
        correct_practical=judge(pred_status, y_pred, gt_status, y_ref, eps_practical),
    )


def silent_failure_metrics(exec_pct: float, acc_pct: float) -> tuple[float, float | None]:
    """(gap, rate): gap = Exec% - Acc%; rate = gap / Exec% (None when Exec 0)."""
    gap = exec_pct - acc_pct
    rate = gap / exec_pct if exec_pct > 0 else None
    return gap, rate


@dataclass
class FamilyRow:
    family: str
    count: int
    exec_pct: float
    acc_strict_pct: float
    acc_practical_pct: float


@dataclass
class SuiteReport:
    count: int
    exec_pct: float
    acc_strict_pct: float
    acc_practical_pct: float
    sf_gap_strict: float
    sf_gap_practical: float
    sf_rate_strict: float | None
    sf_rate_practical: float | None
    families: list[FamilyRow]

    def to_json_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["families"] = [asdict(f) for f in self.families]
        return out


def aggregate(records: Iterable[EvalRecord]) -> SuiteReport:
    """Suite-level metrics plus the per-family table."""
    records = list(records)
    if not records:
        raise EmptySuite("no evaluation records to aggregate")
    n = len(records)

    def pct(flags: Iterable[bool]) -> float:
        return 100.0 * sum(1 for f in flags if f) / n

    executed_feasible = [
        r.executed and r.pred_status == FEASIBLE for r in records]
    exec_pct = pct(executed_feasible)
    acc_strict = pct(r.correct_strict for r in records)
    acc_practical = pct(r.correct_practical for r in records)
    gap_s, rate_s = silent_failure_metrics(exec_pct, acc_strict)
    gap_p, rate_p = silent_failure_metrics(exec_pct, acc_practical)

    rows = []
    present = sorted({r.family for r in records},
                     key=lambda f: (FAMILIES.index(f) if f in FAMILIES else 99, f))
    for fam in present:
        group = [r for r in records if r.family == fam]
        m = len(group)
        rows.append(FamilyRow(
            family=fam,
            count=m,
            exec_pct=100.0 * sum(
                1 for r in group if r.executed and r.pred_status == FEASIBLE) / m,
            acc_strict_pct=100.0 * sum(1 for r in group if r.correct_strict) / m,
            acc_practical_pct=100.0 * sum(1 for r in group if r.correct_practical) / m,
        ))

    return SuiteReport(
        count=n,
        exec_pct=exec_pct,
        acc_strict_pct=acc_strict,
        acc_practical_pct=acc_practical,
        sf_gap_strict=gap_s,
        sf_gap_practical=gap_p,
        sf_rate_strict=rate_s,
        sf_rate_practical=rate_p,
        families=rows,
    )


def render_table(report: SuiteReport) -> str:
    """Plain-text per-family table with a totals row."""
    header = f"{'Family':<10}{'#':>5}{'Exec%':>9}{'Acc%(1e-4)':>12}{'Acc%(1e-2)':>12}"
    lines = [header, "-" * len(header)]
    for row in report.families:
        lines.append(
            f"{row.family:<10}{row.count:>5}{row.exec_pct:>9.1f}"
            f"{row.acc_strict_pct:>12.1f}{row.acc_practical_pct:>12.1f}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'Total':<10}{report.count:>5}{report.exec_pct:>9.1f}"
        f"{report.acc_strict_pct:>12.1f}{report.acc_practical_pct:>12.1f}"
    )
    rate_s = "n/a" if report.sf_rate_strict is None else f"{report.sf_rate_strict:.3f}"
    rate_p = "n/a" if report.sf_rate_practical is None else f"{report.sf_rate_practical:.3f}"
    lines.append("")
    lines.append(
        f"Silent failures: gap {report.sf_gap_strict:.1f}pp (strict) / "
        f"{report.sf_gap_practical:.1f}pp (practical); "
        f"rate {rate_s} (strict) / {rate_p} (practical)"
    )
    return "\n".join(lines) + "\n"


def write_records(records: Iterable[EvalRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")


def read_records(path: str | Path) -> list[EvalRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw: Mapping[str, Any] = json.loads(line)
            records.append(EvalRecord(**raw))
    return records
