"""Counterfactual search: projection, line search, sparsity post-processing.

Three variants share one mechanism: encode the input row into latent
space, project onto the prediction hyperplane (or an intersection of
hyperplanes), then step along a chosen direction in epsilon increments,
decoding and hardening each candidate and asking the black box whether
the label flipped. Validity is always certified by the black box on the
hardened output row, never by the linear surrogate.

Variants:

* ``ce1`` - direct search along the prediction-plane normal.
* ``ce2`` - single-feature (sparse) search along a direction orthogonal
  to every other feature's normal, with post-processing that forces the
  final row to differ in exactly one feature.
* ``ce3`` - constrained search along the combined directions of a
  user-chosen set of changeable features, orthogonal to all frozen ones.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ExplainFailure,
    ExplainRequestError,
    RecourseError,
)
from .geometry import (
    TAU_DEG,
    orthogonalize_directions,
    project_onto_hyperplane,
    project_onto_intersection,
)
from .neural import decode_latent, encode_latent, predict
from .surrogate import Hyperplane, SurrogateBundle
from .tabular import (
    CONTINUOUS,
    DatasetSchema,
    RawRow,
    encode,
    harden,
    l0_feature_diff,
    row_distance,
)

RESULT_VERSION = 1

VARIANT_DIRECT = "ce1"
VARIANT_SPARSE = "ce2"
VARIANT_CONSTRAINED = "ce3"
VARIANTS = (VARIANT_DIRECT, VARIANT_SPARSE, VARIANT_CONSTRAINED)


@dataclass(frozen=True)
class ExplainRequest:
    """One explanation request. Defaults: step 0.1, budget 10, no
    robustness margin."""

    row: RawRow
    variant: str = VARIANT_DIRECT
    target_feature: str | None = None
    free_features: tuple[str, ...] = ()
    eps0: float = 0.0
    d_eps: float = 0.1
    eps_max: float = 10.0
    robust_margin_steps: int = 0
    seed: int = 0

    def validate(self, schema: DatasetSchema) -> None:
        if self.variant not in VARIANTS:
            raise ExplainRequestError(f"unknown variant {self.variant!r}")
        if self.d_eps <= 0:
            raise ExplainRequestError("d_eps must be > 0")
        if self.eps_max <= 0:
            raise ExplainRequestError("eps_max must be > 0")
        if self.eps0 < 0:
            raise ExplainRequestError("eps0 must be >= 0")
        if self.robust_margin_steps < 0:
            raise ExplainRequestError("robust_margin_steps must be >= 0")
        if self.variant == VARIANT_SPARSE:
            if not self.target_feature:
                raise ExplainRequestError("ce2 requires a target feature")
            spec = schema.feature(self.target_feature)
            if not spec.mutable:
                raise ExplainRequestError(
                    f"target feature {self.target_feature!r} is immutable"
                )
        if self.variant == VARIANT_CONSTRAINED:
            if not self.free_features:
                raise ExplainRequestError("ce3 requires a non-empty free set")
            for name in self.free_features:
                spec = schema.feature(name)
                if not spec.mutable:
                    raise ExplainRequestError(
                        f"free feature {name!r} is immutable"
                    )


@dataclass(frozen=True)
class SearchDirection:
    unit: np.ndarray
    sign: int

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.unit))
        if abs(norm - 1.0) > 1e-9:
            raise ExplainFailure("search direction must be unit length")


@dataclass
class ExplainResult:
    counterfactual: RawRow | None
    valid: bool
    steps_taken: int
    eps_at_validity: float | None
    changed_features: tuple[str, ...]
    proximity: float | None
    sparsity: int
    postprocessed: bool
    elapsed_us: int
    diagnostics: dict
    error: str | None = None

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "version": RESULT_VERSION,
            "valid": self.valid,
            "counterfactual": (
                dict(self.counterfactual.values) if self.counterfactual else None
            ),
            "steps_taken": self.steps_taken,
            "eps_at_validity": self.eps_at_validity,
            "changed_features": list(self.changed_features),
            "proximity": self.proximity,
            "sparsity": self.sparsity,
            "postprocessed": self.postprocessed,
            "diagnostics": dict(self.diagnostics),
            "error": self.error,
        }
        if include_timing:
            doc["elapsed_us"] = self.elapsed_us
        return doc


def error_result(message: str, elapsed_us: int = 0) -> ExplainResult:
    return ExplainResult(
        counterfactual=None,
        valid=False,
        steps_taken=0,
        eps_at_validity=None,
        changed_features=(),
        proximity=None,
        sparsity=0,
        postprocessed=False,
        elapsed_us=elapsed_us,
        diagnostics={},
        error=message,
    )


def choose_sign(
    plane: Hyperplane, z: np.ndarray, input_label: int, schema: DatasetSchema
) -> int:
    """Orientation of the search along the plane normal.

    When the plane's own verdict at z matches the black box, the search
    crosses the plane (sign opposite to z's side); when they disagree the
    black-box boundary lies beyond the plane on z's side, so the search
    moves away from it. A point exactly on the plane counts as the
    positive side.
    """
    side = 1 if plane.value(z) >= 0 else -1
    positive_index = schema.label_index(plane.kind.positive)
    plane_label = positive_index if side > 0 else 1 - positive_index
    return -side if plane_label == input_label else side


def oriented_unit(vec: np.ndarray, prediction_plane: Hyperplane) -> np.ndarray:
    """Unit vector flipped, if needed, so it increases the prediction
    plane's affine value; the sign from :func:`choose_sign` then has the
    same meaning for every search direction."""
    v = np.asarray(vec, float)
    norm = float(np.linalg.norm(v))
    if norm <= TAU_DEG:
        raise ExplainFailure("degenerate search direction")
    unit = v / norm
    if float(np.asarray(prediction_plane.normal, float) @ unit) < 0:
        unit = -unit
    return unit


@dataclass
class _SearchOutcome:
    valid: bool
    steps_taken: int
    eps_first: float | None
    eps_final: float | None
    hard_row: RawRow | None
    z_final: np.ndarray | None
    margin_steps_applied: int


def _candidate_label(
    bundle: SurrogateBundle, z: np.ndarray
) -> tuple[RawRow, int]:
    soft = decode_latent(bundle.autoencoder, z)
    hard = harden(soft, bundle.schema)
    label, _ = predict(bundle.blackbox, encode(hard, bundle.schema))
    return hard, label


def line_search(
    bundle: SurrogateBundle,
    z_start: np.ndarray,
    direction: SearchDirection,
    req: ExplainRequest,
    input_label: int,
) -> _SearchOutcome:
    """Step from z_start in d_eps increments until the hardened decoded
    candidate flips the black-box label, then extend by the robustness
    margin, re-verifying validity at every extra step."""
    step_index = 0
    found = None
    while True:
        eps = req.eps0 + step_index * req.d_eps
        if eps > req.eps_max + 1e-12:
            break
        z = z_start + (eps * direction.sign) * direction.unit
        hard, label = _candidate_label(bundle, z)
        if label != input_label:
            found = (eps, z, hard)
            break
        step_index += 1
    if found is None:
        return _SearchOutcome(False, step_index, None, None, None, None, 0)

    eps_first, z_best, hard_best = found
    eps_best = eps_first
    applied = 0
    for m in range(1, req.robust_margin_steps + 1):
        eps_m = eps_first + m * req.d_eps
        z_m = z_start + (eps_m * direction.sign) * direction.unit
        hard_m, label_m = _candidate_label(bundle, z_m)
        if label_m == input_label:
            break
        z_best, hard_best, eps_best = z_m, hard_m, eps_m
        applied = m
    return _SearchOutcome(
        True, step_index, eps_first, eps_best, hard_best, z_best, applied
    )


@dataclass
class _Prepared:
    x_enc: np.ndarray
    input_label: int
    z_test: np.ndarray


def _prepare(bundle: SurrogateBundle, req: ExplainRequest) -> _Prepared:
    req.validate(bundle.schema)
    x_enc = encode(req.row, bundle.schema).data
    input_label, _ = predict(bundle.blackbox, x_enc)
    z_test = encode_latent(bundle.autoencoder, x_enc)
    return _Prepared(x_enc=x_enc, input_label=input_label, z_test=z_test)


def _finish(
    bundle: SurrogateBundle,
    req: ExplainRequest,
    outcome: _SearchOutcome,
    diagnostics: dict,
    t0: float,
    counterfactual: RawRow | None = None,
    postprocessed: bool = False,
    valid_override: bool | None = None,
) -> ExplainResult:
    schema = bundle.schema
    valid = outcome.valid if valid_override is None else valid_override
    row_out = counterfactual if counterfactual is not None else outcome.hard_row
    if not valid:
        row_out = None
    if row_out is not None:
        sparsity, changed = l0_feature_diff(req.row, row_out, schema)
        prox = row_distance(req.row, row_out, schema)
        out_label, _ = predict(bundle.blackbox, encode(row_out, schema))
        diagnostics["output_label"] = schema.target_labels[out_label]
    else:
        sparsity, changed, prox = 0, [], None
    elapsed_us = int((time.perf_counter() - t0) * 1e6)
    return ExplainResult(
        counterfactual=row_out,
        valid=valid,
        steps_taken=outcome.steps_taken,
        eps_at_validity=outcome.eps_first,
        changed_features=tuple(changed),
        proximity=prox,
        sparsity=sparsity,
        postprocessed=postprocessed,
        elapsed_us=elapsed_us,
        diagnostics=diagnostics,
    )


def explain_direct(bundle: SurrogateBundle, req: ExplainRequest) -> ExplainResult:
    """Search along the prediction-plane normal (variant ce1)."""
    t0 = time.perf_counter()
    ctx = _prepare(bundle, req)
    plane = bundle.prediction_plane
    z_proj = project_onto_hyperplane(ctx.z_test, plane)
    sign = choose_sign(plane, ctx.z_test, ctx.input_label, bundle.schema)
    direction = SearchDirection(unit=plane.unit_normal(), sign=sign)
    outcome = line_search(bundle, z_proj, direction, req, ctx.input_label)
    diagnostics = {
        "variant": req.variant,
        "direction_sign": sign,
        "plane_quality": plane.fit_quality,
        "intersection_residual": None,
        "margin_steps_applied": outcome.margin_steps_applied,
        "input_label": bundle.schema.target_labels[ctx.input_label],
    }
    return _finish(bundle, req, outcome, diagnostics, t0)


def postprocess_sparse(
    candidate: RawRow,
    x_test: RawRow,
    feature: str,
    bb,
    schema: DatasetSchema,
    perturb_budget: int = 50,
    seed: int = 0,
) -> RawRow | None:
    """Force a single-feature explanation: reset every feature except the
    target to the input's value, then perturb the target alone until the
    label flips (widening continuous deltas by 1.5x per trial, cycling
    remaining categories) or the budget runs out."""
    spec = schema.feature(feature)
    input_label, _ = predict(bb, encode(x_test, schema))

    def with_value(v: str | float) -> RawRow:
        values = {f.name: x_test.get(f.name) for f in schema.features}
        values[feature] = v
        return RawRow(values)

    def is_valid(row: RawRow) -> bool:
        label, _ = predict(bb, encode(row, schema))
        return label != input_label

    trial = with_value(candidate.get(feature))
    if is_valid(trial):
        return trial

    if spec.kind == CONTINUOUS:
        x_a = float(x_test.get(feature))
        delta = float(candidate.get(feature)) - x_a
        if abs(delta) <= 1e-12 * max(spec.span, 1.0):
            rng = np.random.default_rng(seed)
            span = spec.span if spec.span > 0 else 1.0
            delta = 0.01 * span * (1.0 if rng.random() < 0.5 else -1.0)
        for _ in range(perturb_budget):
            delta *= 1.5
            value = min(spec.max, max(spec.min, x_a + delta))
            trial = with_value(value)
            if is_valid(trial):
                return trial
    else:
        current = str(candidate.get(feature))
        cats = list(spec.categories)
        start = cats.index(current) if current in cats else 0
        rotation = [
            cats[(start + i) % len(cats)]
            for i in range(1, len(cats))
        ]
        for cat in rotation[:perturb_budget]:
            trial = with_value(cat)
            if is_valid(trial):
                return trial
    return None


def explain_sparse(bundle: SurrogateBundle, req: ExplainRequest) -> ExplainResult:
    """Single-feature search (variant ce2)."""
    t0 = time.perf_counter()
    ctx = _prepare(bundle, req)
    feature = req.target_feature
    schema = bundle.schema

    anchored = bundle.anchored_plane(feature, req.row)
    if anchored is None:
        raise ExplainFailure(f"no surrogate plane available for feature {feature!r}")
    inter = project_onto_intersection(
        ctx.z_test, [bundle.prediction_plane, anchored]
    )

    resolved = bundle.resolved_planes(req.row)
    basis = orthogonalize_directions(
        resolved, frozen=set(resolved) - {feature}, free={feature}
    )
    if feature in basis.unreachable:
        raise ExplainFailure(f"sparse direction unavailable for feature {feature!r}")

    sign = choose_sign(
        bundle.prediction_plane, ctx.z_test, ctx.input_label, schema
    )
    unit = oriented_unit(basis.direction(feature), bundle.prediction_plane)
    direction = SearchDirection(unit=unit, sign=sign)
    outcome = line_search(bundle, inter.point, direction, req, ctx.input_label)

    diagnostics = {
        "variant": req.variant,
        "direction_sign": sign,
        "plane_quality": bundle.prediction_plane.fit_quality,
        "intersection_residual": inter.residual,
        "intersection_converged": inter.converged,
        "margin_steps_applied": outcome.margin_steps_applied,
        "input_label": schema.target_labels[ctx.input_label],
    }

    counterfactual = None
    postprocessed = False
    valid_override = None
    if outcome.valid:
        l0, _ = l0_feature_diff(req.row, outcome.hard_row, schema)
        if l0 > 1:
            postprocessed = True
            counterfactual = postprocess_sparse(
                outcome.hard_row,
                req.row,
                feature,
                bundle.blackbox,
                bundle.schema,
                seed=req.seed,
            )
            if counterfactual is None:
                valid_override = False
                diagnostics["note"] = (
                    "post-processing could not isolate the target feature"
                )
    return _finish(
        bundle,
        req,
        outcome,
        diagnostics,
        t0,
        counterfactual=counterfactual,
        postprocessed=postprocessed,
        valid_override=valid_override,
    )


def explain_constrained(
    bundle: SurrogateBundle, req: ExplainRequest
) -> ExplainResult:
    """Search constrained to a user-chosen free set (variant ce3)."""
    t0 = time.perf_counter()
    ctx = _prepare(bundle, req)
    schema = bundle.schema
    free = set(req.free_features)

    planes = [bundle.prediction_plane]
    for name in sorted(free):
        anchored = bundle.anchored_plane(name, req.row)
        if anchored is not None:
            planes.append(anchored)
    inter = project_onto_intersection(ctx.z_test, planes)

    resolved = bundle.resolved_planes(req.row)
    free_in = free & set(resolved)
    basis = orthogonalize_directions(
        resolved, frozen=set(resolved) - free_in, free=free_in
    )
    parts = [
        basis.direction(name)
        for name in sorted(free_in)
        if name not in basis.unreachable
    ]
    if not parts:
        raise ExplainFailure("no feasible constrained direction")
    combined = np.sum(parts, axis=0)
    if float(np.linalg.norm(combined)) <= TAU_DEG:
        raise ExplainFailure("no feasible constrained direction")

    sign = choose_sign(
        bundle.prediction_plane, ctx.z_test, ctx.input_label, schema
    )
    unit = oriented_unit(combined, bundle.prediction_plane)
    direction = SearchDirection(unit=unit, sign=sign)
    outcome = line_search(bundle, inter.point, direction, req, ctx.input_label)

    diagnostics = {
        "variant": req.variant,
        "direction_sign": sign,
        "plane_quality": bundle.prediction_plane.fit_quality,
        "intersection_residual": inter.residual,
        "intersection_converged": inter.converged,
        "margin_steps_applied": outcome.margin_steps_applied,
        "input_label": schema.target_labels[ctx.input_label],
        "free_features_used": sorted(free_in - basis.unreachable),
    }
    return _finish(bundle, req, outcome, diagnostics, t0)


_DISPATCH = {
    VARIANT_DIRECT: explain_direct,
    VARIANT_SPARSE: explain_sparse,
    VARIANT_CONSTRAINED: explain_constrained,
}


def explain(bundle: SurrogateBundle, req: ExplainRequest) -> ExplainResult:
    if req.variant not in _DISPATCH:
        raise ExplainRequestError(f"unknown variant {req.variant!r}")
    return _DISPATCH[req.variant](bundle, req)


def explain_batch(
    bundle: SurrogateBundle, requests: Sequence[ExplainRequest]
) -> list[ExplainResult]:
    """Order-preserving batch; per-item failures become error entries and
    never abort the batch."""
    results = []
    for req in requests:
        t0 = time.perf_counter()
        try:
            results.append(explain(bundle, req))
        except RecourseError as exc:
            elapsed = int((time.perf_counter() - t0) * 1e6)
            results.append(error_result(str(exc), elapsed))
    return results
