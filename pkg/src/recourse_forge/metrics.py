"""Evaluation harness: validity, sparsity, proximity, runtime, robustness.

Proximity is the MAD-normalized Euclidean distance over continuous
features plus the simple matching distance averaged over categorical
features; it is reported over valid explanations only (invalid ones have
no counterfactual). Robustness follows the perturb-and-reapply protocol:
jitter the input on exactly the features the explanation changed, carry
the recourse delta over from the perturbed input, and check whether the
black box still assigns the counterfactual class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RecourseError
from .explain import (
    VARIANT_DIRECT,
    ExplainRequest,
    ExplainResult,
    explain_batch,
)
from .neural import predict
from .surrogate import SurrogateBundle
from .tabular import CONTINUOUS, DatasetSchema, RawRow, encode, row_distance

REPORT_VERSION = 1


def proximity(x: RawRow, c: RawRow, schema: DatasetSchema) -> float:
    """Distance between an input row and its counterfactual."""
    return row_distance(x, c, schema)


@dataclass
class CaseRecord:
    index: int
    valid: bool
    sparsity: int
    proximity: float | None
    runtime_us: int
    changed_features: tuple[str, ...]
    error: str | None = None


@dataclass
class EvalReport:
    validity_pct: float
    mean_sparsity: float
    mean_proximity: float
    mean_runtime_us: float
    n_cases: int
    per_case: list[CaseRecord]
    config: dict
    robustness_pct: float | None = None

    def verify_consistency(self, atol: float = 1e-9) -> None:
        """Aggregates must be recomputable from the per-case records."""
        agg = _aggregate(self.per_case)
        for name in ("validity_pct", "mean_sparsity", "mean_proximity", "mean_runtime_us"):
            a, b = getattr(self, name), getattr(agg, name)
            if not np.isclose(a, b, atol=atol, equal_nan=True):
                raise RecourseError(
                    f"report aggregate {name} = {a} but per-case records give {b}"
                )

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "validity_pct": self.validity_pct,
            "mean_sparsity": self.mean_sparsity,
            "mean_proximity": self.mean_proximity,
            "mean_runtime_us": self.mean_runtime_us,
            "robustness_pct": self.robustness_pct,
            "n_cases": self.n_cases,
            "config": dict(self.config),
            "per_case": [
                {
                    "index": r.index,
                    "valid": r.valid,
                    "sparsity": r.sparsity,
                    "proximity": r.proximity,
                    "runtime_us": r.runtime_us,
                    "changed_features": list(r.changed_features),
                    "error": r.error,
                }
                for r in self.per_case
            ],
        }


@dataclass
class _Aggregates:
    validity_pct: float
    mean_sparsity: float
    mean_proximity: float
    mean_runtime_us: float


def _aggregate(records: Sequence[CaseRecord]) -> _Aggregates:
    n = len(records)
    valid = [r for r in records if r.valid]
    validity_pct = 100.0 * len(valid) / n if n else 0.0
    mean_sparsity = (
        float(np.mean([r.sparsity for r in valid])) if valid else float("nan")
    )
    mean_proximity = (
        float(np.mean([r.proximity for r in valid])) if valid else float("nan")
    )
    mean_runtime = float(np.mean([r.runtime_us for r in records])) if n else 0.0
    return _Aggregates(validity_pct, mean_sparsity, mean_proximity, mean_runtime)


def records_from_results(results: Sequence[ExplainResult]) -> list[CaseRecord]:
    return [
        CaseRecord(
            index=i,
            valid=r.valid,
            sparsity=r.sparsity,
            proximity=r.proximity,
            runtime_us=r.elapsed_us,
            changed_features=r.changed_features,
            error=r.error,
        )
        for i, r in enumerate(results)
    ]


def evaluate(
    bundle: SurrogateBundle,
    test_rows: Sequence[RawRow],
    request_template: ExplainRequest | None = None,
    **request_overrides,
) -> EvalReport:
    """Run the batch and aggregate. Failures count as invalid; sparsity
    and proximity average over valid cases, runtime over all cases."""
    if not test_rows:
        raise RecourseError("need at least one test row")
    base = request_template or ExplainRequest(row=test_rows[0])
    requests = []
    for i, row in enumerate(test_rows):
        requests.append(
            ExplainRequest(
                row=row,
                variant=request_overrides.get("variant", base.variant),
                target_feature=request_overrides.get(
                    "target_feature", base.target_feature
                ),
                free_features=tuple(
                    request_overrides.get("free_features", base.free_features)
                ),
                eps0=request_overrides.get("eps0", base.eps0),
                d_eps=request_overrides.get("d_eps", base.d_eps),
                eps_max=request_overrides.get("eps_max", base.eps_max),
                robust_margin_steps=request_overrides.get(
                    "robust_margin_steps", base.robust_margin_steps
                ),
                seed=base.seed + i,
            )
        )
    results = explain_batch(bundle, requests)
    records = records_from_results(results)
    agg = _aggregate(records)
    config = {
        "variant": requests[0].variant,
        "target_feature": requests[0].target_feature,
        "free_features": list(requests[0].free_features),
        "d_eps": requests[0].d_eps,
        "eps_max": requests[0].eps_max,
        "robust_margin_steps": requests[0].robust_margin_steps,
        "seed": base.seed,
    }
    return EvalReport(
        validity_pct=agg.validity_pct,
        mean_sparsity=agg.mean_sparsity,
        mean_proximity=agg.mean_proximity,
        mean_runtime_us=agg.mean_runtime_us,
        n_cases=len(records),
        per_case=records,
        config=config,
    )


def perturb_row(
    row: RawRow,
    changed: Sequence[str],
    schema: DatasetSchema,
    scale: float,
    rng: np.random.Generator,
) -> RawRow:
    """Jitter only the named features: uniform noise of +-scale in
    normalized units on continuous ones (clamped to the training range),
    category resampling with probability ``scale`` on categorical ones."""
    values = {f.name: row.get(f.name) for f in schema.features}
    for name in changed:
        spec = schema.feature(name)
        if spec.kind == CONTINUOUS:
            noise = rng.uniform(-scale, scale) * (spec.span if spec.span > 0 else 1.0)
            values[name] = min(spec.max, max(spec.min, float(values[name]) + noise))
        else:
            if rng.random() < scale:
                values[name] = str(rng.choice(list(spec.categories)))
    return RawRow(values)


def apply_recourse_delta(
    perturbed: RawRow,
    original: RawRow,
    counterfactual: RawRow,
    changed: Sequence[str],
    schema: DatasetSchema,
) -> RawRow:
    """Re-apply the original recourse action starting from the perturbed
    input: carry each changed continuous feature's delta over additively
    (clamped), set changed categoricals to the counterfactual's category,
    and keep every other feature at the perturbed input's value."""
    values = {f.name: perturbed.get(f.name) for f in schema.features}
    for name in changed:
        spec = schema.feature(name)
        if spec.kind == CONTINUOUS:
            delta = float(counterfactual.get(name)) - float(original.get(name))
            values[name] = min(
                spec.max, max(spec.min, float(perturbed.get(name)) + delta)
            )
        else:
            values[name] = counterfactual.get(name)
    return RawRow(values)


@dataclass(frozen=True)
class RobustnessPoint:
    robustness_pct: float
    mean_proximity: float
    n_valid: int


def evaluate_robustness(
    bundle: SurrogateBundle,
    test_rows: Sequence[RawRow],
    d_eps_list: Sequence[float],
    perturb_scale: float = 0.05,
    seed: int = 0,
) -> dict[float, RobustnessPoint]:
    """Robustness-of-recourse and proximity per step size.

    For each row and step size: find a direct (ce1) explanation, perturb
    the input on the changed features, re-apply the recourse delta, and
    check the black box still gives the counterfactual class. The same
    per-row noise draw is reused across step sizes.
    """
    if perturb_scale < 0:
        raise RecourseError("perturb_scale must be >= 0")
    schema = bundle.schema
    out: dict[float, RobustnessPoint] = {}
    for d_eps in d_eps_list:
        robust = 0
        n_valid = 0
        proximities = []
        for i, row in enumerate(test_rows):
            req = ExplainRequest(
                row=row, variant=VARIANT_DIRECT, d_eps=d_eps, seed=seed + i
            )
            result = explain_batch(bundle, [req])[0]
            if not result.valid:
                continue
            n_valid += 1
            proximities.append(result.proximity)
            target_label, _ = predict(
                bundle.blackbox, encode(result.counterfactual, schema)
            )
            rng = np.random.default_rng((seed, i))
            perturbed = perturb_row(
                row, result.changed_features, schema, perturb_scale, rng
            )
            reapplied = apply_recourse_delta(
                perturbed, row, result.counterfactual, result.changed_features, schema
            )
            label, _ = predict(bundle.blackbox, encode(reapplied, schema))
            if label == target_label:
                robust += 1
        out[float(d_eps)] = RobustnessPoint(
            robustness_pct=100.0 * robust / n_valid if n_valid else 0.0,
            mean_proximity=float(np.mean(proximities)) if proximities else float("nan"),
            n_valid=n_valid,
        )
    return out
