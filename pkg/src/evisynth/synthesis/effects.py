"""Effect sizes and pooling: log risk ratio, fixed-effect inverse-variance,
DerSimonian-Laird random effects.

Counts may be fractional (they come out of a transform program). A single
zero event cell gets the classic +0.5 continuity correction applied to all
four cells; a double-zero study carries no information about the ratio and
is excluded outright.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from ..core import canonical_json
from ..errors import EviSynthError

Z95 = 1.96


class DoubleZeroExcluded(EviSynthError):
    code = "double_zero_excluded"


class RowInvariantViolation(EviSynthError):
    code = "row_invariant_violation"


class EmptyInput(EviSynthError):
    code = "empty_input"


@dataclass(frozen=True)
class EffectRow:
    """One study's contribution: either 2x2 counts (a/n1 events/total in
    the treatment arm, c/n2 in control) or a precomputed log effect."""

    pmid: str
    a: float | None = None
    n1: float | None = None
    c: float | None = None
    n2: float | None = None
    log_effect: float | None = None
    se: float | None = None
    continuity_corrected: bool = False

    def __post_init__(self):
        counts = (self.a, self.n1, self.c, self.n2)
        has_counts = all(v is not None for v in counts)
        has_effect = self.log_effect is not None and self.se is not None
        if has_counts == has_effect:
            raise RowInvariantViolation(
                f"row {self.pmid}: provide counts (a,n1,c,n2) or (log_effect,se), not "
                + ("both" if has_counts else "neither")
            )
        if has_counts:
            if any(not math.isfinite(v) for v in counts):
                raise RowInvariantViolation(f"row {self.pmid}: non-finite counts")
            if self.n1 < 1 or self.n2 < 1:
                raise RowInvariantViolation(f"row {self.pmid}: arm totals must be >= 1")
            if not (0 <= self.a <= self.n1) or not (0 <= self.c <= self.n2):
                raise RowInvariantViolation(
                    f"row {self.pmid}: events must satisfy 0 <= events <= total"
                )
        else:
            if not math.isfinite(self.log_effect) or not math.isfinite(self.se):
                raise RowInvariantViolation(f"row {self.pmid}: non-finite effect")
            if self.se <= 0:
                raise RowInvariantViolation(f"row {self.pmid}: se must be > 0")

    @property
    def has_counts(self) -> bool:
        return self.a is not None

    def to_dict(self) -> dict:
        return {
            "pmid": self.pmid,
            "a": self.a,
            "n1": self.n1,
            "c": self.c,
            "n2": self.n2,
            "log_effect": self.log_effect,
            "se": self.se,
            "continuity_corrected": self.continuity_corrected,
        }

    @classmethod
    def from_dict(cls, data: dict) -> EffectRow:
        return cls(
            pmid=data["pmid"],
            a=data.get("a"),
            n1=data.get("n1"),
            c=data.get("c"),
            n2=data.get("n2"),
            log_effect=data.get("log_effect"),
            se=data.get("se"),
            continuity_corrected=data.get("continuity_corrected", False),
        )


@dataclass(frozen=True)
class EffectEstimate:
    """A row's log risk ratio and standard error, plus the row actually
    used (counts post-correction when the correction fired)."""

    row: EffectRow
    log_rr: float
    se: float


def compute_effect(row: EffectRow) -> EffectEstimate:
    """log RR = ln((a/n1)/(c/n2)); se = sqrt(1/a - 1/n1 + 1/c - 1/n2).

    Zero events in exactly one arm: add 0.5 to all four cells and flag the
    row. Zero events in both arms: DoubleZeroExcluded.
    """
    if not row.has_counts:
        return EffectEstimate(row=row, log_rr=row.log_effect, se=row.se)
    a, n1, c, n2 = row.a, row.n1, row.c, row.n2
    if a == 0 and c == 0:
        raise DoubleZeroExcluded(f"row {row.pmid}: no events in either arm")
    corrected = a == 0 or c == 0
    if corrected:
        a, n1, c, n2 = a + 0.5, n1 + 0.5, c + 0.5, n2 + 0.5
        row = EffectRow(
            pmid=row.pmid, a=a, n1=n1, c=c, n2=n2, continuity_corrected=True
        )
    # difference of logs, so swapping the arms negates the result exactly;
    # the variance groups event terms and denominator terms so the swap
    # also leaves se bit-identical (float addition commutes)
    log_rr = math.log(a / n1) - math.log(c / n2)
    se = math.sqrt((1 / a + 1 / c) - (1 / n1 + 1 / n2))
    return EffectEstimate(row=row, log_rr=log_rr, se=se)


@dataclass(frozen=True)
class StudyEffect:
    pmid: str
    log_effect: float
    se: float


def study_effect(estimate: EffectEstimate) -> StudyEffect:
    return StudyEffect(pmid=estimate.row.pmid, log_effect=estimate.log_rr, se=estimate.se)


@dataclass(frozen=True)
class PooledResult:
    method: str  # fixed_iv | random_dl
    k: int
    estimate: float  # log scale
    se: float
    ci_low: float
    ci_high: float
    exp_estimate: float
    exp_ci_low: float
    exp_ci_high: float
    weights: tuple[tuple[str, float], ...]  # normalized, input order
    q: float
    df: int
    i2: float
    tau2: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "estimate": self.estimate,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "exp_estimate": self.exp_estimate,
            "exp_ci_low": self.exp_ci_low,
            "exp_ci_high": self.exp_ci_high,
            "weights": [{"pmid": p, "weight": w} for p, w in self.weights],
            "q": self.q,
            "df": self.df,
            "i2": self.i2,
            "tau2": self.tau2,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def pool(effects: list[StudyEffect] | tuple[StudyEffect, ...], method: str = "random_dl") -> PooledResult:
    """Pool per-study log effects.

    fixed_iv: weights 1/se^2. random_dl: DerSimonian-Laird tau^2 estimated
    from the fixed-effect Q, then weights 1/(se^2 + tau^2). Q, df, and I^2
    always describe the fixed-effect stage.
    """
    if method not in ("fixed_iv", "random_dl"):
        raise ValueError(f"unknown pooling method {method!r}")
    if not effects:
        raise EmptyInput("no rows to pool")
    for e in effects:
        if e.se <= 0 or not math.isfinite(e.se) or not math.isfinite(e.log_effect):
            raise ValueError(f"row {e.pmid}: unusable standard error or effect")

    k = len(effects)
    fixed_w = [1 / e.se**2 for e in effects]
    sum_w = sum(fixed_w)
    fixed_est = sum(w * e.log_effect for w, e in zip(fixed_w, effects)) / sum_w
    q = sum(w * (e.log_effect - fixed_est) ** 2 for w, e in zip(fixed_w, effects))
    df = k - 1
    # with a single study Q is identically zero; any float residue from the
    # weighted mean must not read as 100% heterogeneity
    i2 = max(0.0, (q - df) / q) if df > 0 and q > 0 else 0.0

    if method == "fixed_iv":
        tau2 = 0.0
        weights = fixed_w
        estimate = fixed_est
    else:
        denominator = sum_w - sum(w**2 for w in fixed_w) / sum_w
        tau2 = max(0.0, (q - df) / denominator) if denominator > 0 else 0.0
        weights = [1 / (e.se**2 + tau2) for e in effects]
        estimate = sum(w * e.log_effect for w, e in zip(weights, effects)) / sum(weights)

    total = sum(weights)
    se = math.sqrt(1 / total)
    ci_low, ci_high = estimate - Z95 * se, estimate + Z95 * se
    return PooledResult(
        method=method,
        k=k,
        estimate=estimate,
        se=se,
        ci_low=ci_low,
        ci_high=ci_high,
        exp_estimate=math.exp(estimate),
        exp_ci_low=math.exp(ci_low),
        exp_ci_high=math.exp(ci_high),
        weights=tuple((e.pmid, w / total) for e, w in zip(effects, weights)),
        q=q,
        df=df,
        i2=i2,
        tau2=tau2,
    )


def rows_to_csv(rows: list[EffectRow] | tuple[EffectRow, ...]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pmid", "a", "n1", "c", "n2", "corrected"])
    for row in rows:
        if row.has_counts:
            cells = [_plain(row.a), _plain(row.n1), _plain(row.c), _plain(row.n2)]
        else:
            cells = ["", "", "", ""]
        writer.writerow([row.pmid, *cells, "true" if row.continuity_corrected else "false"])
    return buf.getvalue()


def rows_to_json(rows: list[EffectRow] | tuple[EffectRow, ...]) -> str:
    return canonical_json([row.to_dict() for row in rows])


def _plain(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:g}"
