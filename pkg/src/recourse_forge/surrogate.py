"""Latent-space sampling and linear surrogate hyperplanes.

The latent space of a trained autoencoder is sampled from a per-dimension
uniform box around the training latents. Each sample is decoded and
labeled by the black box, giving one regression/classification problem
per feature (lasso for continuous targets, linear SVM for categorical
one-vs-rest) plus one for the black-box prediction itself. Each fit
yields a hyperplane (normal, offset) in latent space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FitError, SchemaError
from .neural import Autoencoder, BlackBox, decode_latent, forward
from .tabular import CONTINUOUS, DatasetSchema, RawRow

BUNDLE_VERSION = 1

ROLE_CONTINUOUS = "continuous-feature"
ROLE_CATEGORICAL = "categorical-feature"
ROLE_PREDICTION = "prediction"


@dataclass(frozen=True)
class PlaneKind:
    role: str
    feature: str | None = None
    positive: str | None = None


@dataclass(frozen=True)
class Hyperplane:
    """Linear surface <normal, z> + offset in latent space.

    For SVM-fit planes the zero level set is the decision boundary and
    ``kind.positive`` names the positive side. For lasso-fit planes the
    affine form is the surrogate feature value itself.
    """

    normal: np.ndarray
    offset: float
    kind: PlaneKind
    fit_quality: float = 0.0
    converged: bool = True

    def __post_init__(self) -> None:
        n = np.asarray(self.normal, float)
        if not np.isfinite(n).all() or not np.isfinite(self.offset):
            raise SchemaError("hyperplane with non-finite entries")
        if float(np.linalg.norm(n)) <= 0:
            raise SchemaError("hyperplane with zero normal")

    def value(self, z: np.ndarray) -> float:
        return float(np.asarray(self.normal, float) @ np.asarray(z, float)) + self.offset

    def unit_normal(self) -> np.ndarray:
        n = np.asarray(self.normal, float)
        return n / float(np.linalg.norm(n))

    def at_level(self, level: float) -> "Hyperplane":
        """The parallel plane whose zero set is {z : value(z) = level}."""
        return Hyperplane(
            normal=self.normal,
            offset=self.offset - level,
            kind=self.kind,
            fit_quality=self.fit_quality,
            converged=self.converged,
        )


@dataclass(frozen=True)
class SamplerConfig:
    """Uniform box [mu - c*sigma, mu + c*sigma] per latent dimension."""

    mu: np.ndarray
    sigma: np.ndarray
    c: float = 3.0


@dataclass(frozen=True)
class LatentSample:
    z: np.ndarray
    x_prime: np.ndarray
    y_prime: int
    feature_values: dict[str, float | str]


def sampler_from_rows(ae: Autoencoder, x_rows: np.ndarray, c: float = 3.0) -> SamplerConfig:
    """Latent box statistics from the encoded training rows."""
    latents = forward(ae.encoder, np.asarray(x_rows, float))
    return SamplerConfig(
        mu=latents.mean(axis=0), sigma=latents.std(axis=0), c=float(c)
    )


def _sample_arrays(
    ae: Autoencoder,
    bb: BlackBox,
    k: int,
    sampler: SamplerConfig,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if k < ae.latent_dim + 1:
        raise FitError(f"need at least latent_dim+1 = {ae.latent_dim + 1} samples")
    rng = np.random.default_rng(seed)
    lo = sampler.mu - sampler.c * sampler.sigma
    hi = sampler.mu + sampler.c * sampler.sigma
    z = rng.uniform(lo, hi, size=(k, ae.latent_dim))
    x_prime = decode_latent(ae, z)
    y_prime = np.argmax(forward(bb.mlp, x_prime), axis=1)
    if len(np.unique(y_prime)) < 2:
        raise FitError(
            "all sampled points share one black-box class; "
            "increase the sampling box scale c or the sample count k"
        )
    return z, x_prime, y_prime


def sample_latent_space(
    ae: Autoencoder,
    bb: BlackBox,
    schema: DatasetSchema,
    k: int,
    sampler: SamplerConfig,
    seed: int = 0,
) -> list[LatentSample]:
    z, x_prime, y_prime = _sample_arrays(ae, bb, k, sampler, seed)
    samples = []
    for i in range(k):
        values: dict[str, float | str] = {}
        for f in schema.features:
            block = x_prime[i, schema.block(f.name)]
            if f.kind == CONTINUOUS:
                values[f.name] = float(block[0])
            else:
                values[f.name] = f.categories[int(np.argmax(block))]
        samples.append(
            LatentSample(
                z=z[i], x_prime=x_prime[i], y_prime=int(y_prime[i]), feature_values=values
            )
        )
    return samples


def _holdout_split(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    cut = max(1, int(round(0.8 * n)))
    if cut >= n:
        cut = n - 1
    return order[:cut], order[cut:]


def _soft_threshold(x: float, lam: float) -> float:
    if x > lam:
        return x - lam
    if x < -lam:
        return x + lam
    return 0.0


def lasso_coordinate_descent(
    z: np.ndarray,
    t: np.ndarray,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> tuple[np.ndarray, float, bool]:
    """Coordinate-descent minimizer of (1/2k) sum((<w,z>+b-t)^2) + lam*|w|_1.

    The intercept is unpenalized. Converged when no coordinate (including
    the intercept) moved more than ``tol`` in a full sweep; hitting
    ``max_iter`` sweeps returns the best-so-far flagged non-converged.
    """
    z = np.asarray(z, float)
    t = np.asarray(t, float)
    k, d = z.shape
    col_sq = (z * z).sum(axis=0) / k
    w = np.zeros(d)
    b = float(t.mean())
    r = t - b  # residual t - Zw - b
    for _ in range(max_iter):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            w_old = w[j]
            rho = float(z[:, j] @ r) / k + col_sq[j] * w_old
            w[j] = _soft_threshold(rho, lam) / col_sq[j]
            if w[j] != w_old:
                r -= z[:, j] * (w[j] - w_old)
                max_delta = max(max_delta, abs(w[j] - w_old))
        shift = float(r.mean())
        if shift != 0.0:
            b += shift
            r -= shift
            max_delta = max(max_delta, abs(shift))
        if max_delta < tol:
            return w, b, True
    return w, b, False


def lasso_objective(
    z: np.ndarray, t: np.ndarray, w: np.ndarray, b: float, lam: float
) -> float:
    r = np.asarray(t, float) - np.asarray(z, float) @ w - b
    return float((r @ r) / (2 * len(t)) + lam * np.abs(w).sum())


def lasso_kkt_violation(
    z: np.ndarray, t: np.ndarray, w: np.ndarray, b: float, lam: float
) -> float:
    """Worst violation of the lasso stationarity conditions at (w, b)."""
    z = np.asarray(z, float)
    t = np.asarray(t, float)
    k = z.shape[0]
    w = np.asarray(w, float)
    r = t - z @ w - b
    grad = -(z.T @ r) / k
    worst = abs(float(r.mean()))  # intercept stationarity
    for j in range(z.shape[1]):
        if w[j] == 0.0:
            worst = max(worst, max(0.0, abs(grad[j]) - lam))
        else:
            worst = max(worst, abs(grad[j] + lam * np.sign(w[j])))
    return worst


def fit_lasso(
    z: np.ndarray,
    t: np.ndarray,
    lam: float = 1e-3,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    kind: PlaneKind | None = None,
    seed: int = 0,
) -> Hyperplane:
    """Lasso on an 80% split with R^2 on the held-out 20% as fit quality.

    Degenerate solutions (all-zero normal, e.g. lambda beyond the maximal
    correlation) are rejected rather than stored."""
    z = np.asarray(z, float)
    t = np.asarray(t, float)
    if z.shape[0] < z.shape[1] + 1:
        raise FitError("need at least latent_dim+1 samples for a lasso fit")
    train_idx, hold_idx = _holdout_split(z.shape[0], seed)
    w, b, converged = lasso_coordinate_descent(
        z[train_idx], t[train_idx], lam, tol, max_iter
    )
    if float(np.linalg.norm(w)) <= 0:
        raise FitError("degenerate lasso fit: zero normal (lambda too large?)")
    hold_pred = z[hold_idx] @ w + b
    ss_res = float(((t[hold_idx] - hold_pred) ** 2).sum())
    ss_tot = float(((t[hold_idx] - t[hold_idx].mean()) ** 2).sum())
    if ss_tot < 1e-18:
        r2 = 1.0 if ss_res < 1e-12 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return Hyperplane(
        normal=w,
        offset=b,
        kind=kind or PlaneKind(ROLE_CONTINUOUS),
        fit_quality=r2,
        converged=converged,
    )


def svm_subgradient(
    z: np.ndarray, y: np.ndarray, c: float = 1.0, epochs: int = 300
) -> tuple[np.ndarray, float]:
    """Full-batch subgradient descent on (1/2)|w|^2 + c*sum(hinge), with
    the classic 1/t step schedule (the quadratic term has unit modulus).
    The intercept is unregularized. Deterministic."""
    z = np.asarray(z, float)
    y = np.asarray(y, float)
    w = np.zeros(z.shape[1])
    b = 0.0
    for t_step in range(1, epochs + 1):
        margins = y * (z @ w + b)
        viol = margins < 1.0
        step = 1.0 / t_step
        w = (1.0 - step) * w + step * c * (y[viol, None] * z[viol]).sum(axis=0)
        b = b + step * c * float(y[viol].sum())
    return w, b


def fit_linear_svm(
    z: np.ndarray,
    y: np.ndarray,
    c: float = 1.0,
    epochs: int = 300,
    seed: int = 0,
    kind: PlaneKind | None = None,
) -> Hyperplane:
    """Linear SVM on an 80% split; fit quality is held-out accuracy.

    Labels must be in {-1, +1} with both classes present.
    """
    z = np.asarray(z, float)
    y = np.asarray(y, float)
    if set(np.unique(y)) != {-1.0, 1.0}:
        if len(np.unique(y)) < 2:
            raise FitError("single-class labels: cannot fit an SVM")
        raise FitError("SVM labels must be -1/+1")
    train_idx, hold_idx = _holdout_split(z.shape[0], seed)
    if len(np.unique(y[train_idx])) < 2:
        raise FitError("single-class training split: cannot fit an SVM")
    w, b = svm_subgradient(z[train_idx], y[train_idx], c, epochs)
    if float(np.linalg.norm(w)) <= 0:
        raise FitError("degenerate SVM fit: zero normal")
    hold_pred = np.where(z[hold_idx] @ w + b >= 0, 1.0, -1.0)
    accuracy = float(np.mean(hold_pred == y[hold_idx]))
    return Hyperplane(
        normal=w,
        offset=b,
        kind=kind or PlaneKind(ROLE_PREDICTION),
        fit_quality=accuracy,
        converged=True,
    )


@dataclass(frozen=True)
class SurrogateConfig:
    lasso_lambda: float = 1e-3
    lasso_tol: float = 1e-6
    lasso_max_iter: int = 10_000
    svm_c: float = 1.0
    svm_epochs: int = 300
    sampler_c: float = 3.0
    # Prediction planes at or below chance are useless for search.
    min_prediction_quality: float = 0.5


def default_sample_count(latent_dim: int) -> int:
    return min(200 * latent_dim, 50_000)


@dataclass
class SurrogateBundle:
    """Everything an explanation needs: models, schema, and all planes."""

    autoencoder: Autoencoder
    blackbox: BlackBox
    schema: DatasetSchema
    feature_planes: dict[str, Hyperplane]
    category_planes: dict[str, dict[str, Hyperplane]]
    prediction_plane: Hyperplane
    sample_count: int
    sampler: SamplerConfig
    seed: int
    config: SurrogateConfig = field(default_factory=SurrogateConfig)
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def latent_dim(self) -> int:
        return self.autoencoder.latent_dim

    def validate(self) -> None:
        """Every stored plane must live in the autoencoder's latent space."""
        planes = [self.prediction_plane, *self.feature_planes.values()]
        for per_cat in self.category_planes.values():
            planes.extend(per_cat.values())
        for plane in planes:
            if np.asarray(plane.normal).shape != (self.latent_dim,):
                raise SchemaError(
                    f"plane {plane.kind} has dimension "
                    f"{np.asarray(plane.normal).shape}, bundle latent_dim "
                    f"is {self.latent_dim}"
                )

    def plane_for(self, feature: str, row: RawRow) -> Hyperplane | None:
        """The feature's plane; for categoricals, the one-vs-rest plane of
        the row's current category."""
        spec = self.schema.feature(feature)
        if spec.kind == CONTINUOUS:
            return self.feature_planes.get(feature)
        return self.category_planes.get(feature, {}).get(str(row.get(feature)))

    def anchored_plane(self, feature: str, row: RawRow) -> Hyperplane | None:
        """Plane positioned at the row's current value: the level set of a
        continuous surrogate through the current normalized value, or the
        category decision boundary as-is."""
        plane = self.plane_for(feature, row)
        if plane is None:
            return None
        spec = self.schema.feature(feature)
        if spec.kind == CONTINUOUS:
            x = float(row.get(feature))
            level = 0.0 if spec.span == 0 else min(
                1.0, max(0.0, (x - spec.min) / spec.span)
            )
            return plane.at_level(level)
        return plane

    def resolved_planes(self, row: RawRow) -> dict[str, Hyperplane]:
        out = {}
        for f in self.schema.features:
            plane = self.plane_for(f.name, row)
            if plane is not None:
                out[f.name] = plane
        return out

    def quality_table(self) -> list[tuple[str, str, float, bool]]:
        rows = [("prediction", self.prediction_plane.kind.positive or "",
                 self.prediction_plane.fit_quality, self.prediction_plane.converged)]
        for name, plane in sorted(self.feature_planes.items()):
            rows.append((name, "", plane.fit_quality, plane.converged))
        for name, per_cat in sorted(self.category_planes.items()):
            for cat, plane in sorted(per_cat.items()):
                rows.append((name, cat, plane.fit_quality, plane.converged))
        return rows


def build_surrogate(
    ae: Autoencoder,
    bb: BlackBox,
    schema: DatasetSchema,
    x_train: np.ndarray,
    k: int | None = None,
    config: SurrogateConfig | None = None,
    seed: int = 0,
) -> SurrogateBundle:
    """One shared sampling pass, then one linear fit per feature target
    plus the prediction plane (required; per-feature failures are recorded
    and skipped)."""
    cfg = config or SurrogateConfig()
    if len(schema.target_labels) != 2:
        raise FitError(
            "surrogate search needs a binary target; "
            f"got {len(schema.target_labels)} labels"
        )
    if k is None:
        k = default_sample_count(ae.latent_dim)
    sampler = sampler_from_rows(ae, x_train, cfg.sampler_c)
    z, x_prime, y_prime = _sample_arrays(ae, bb, k, sampler, seed)

    positive_label = schema.target_labels[1]
    y_signed = np.where(y_prime == 1, 1.0, -1.0)
    prediction_plane = fit_linear_svm(
        z,
        y_signed,
        c=cfg.svm_c,
        epochs=cfg.svm_epochs,
        seed=seed,
        kind=PlaneKind(ROLE_PREDICTION, positive=positive_label),
    )
    if prediction_plane.fit_quality <= cfg.min_prediction_quality:
        raise FitError(
            "prediction plane holdout accuracy "
            f"{prediction_plane.fit_quality:.3f} is no better than chance; "
            "increase k or the sampling box scale"
        )

    feature_planes: dict[str, Hyperplane] = {}
    category_planes: dict[str, dict[str, Hyperplane]] = {}
    failures: dict[str, str] = {}
    for f in schema.features:
        block = schema.block(f.name)
        if f.kind == CONTINUOUS:
            try:
                feature_planes[f.name] = fit_lasso(
                    z,
                    x_prime[:, block][:, 0],
                    lam=cfg.lasso_lambda,
                    tol=cfg.lasso_tol,
                    max_iter=cfg.lasso_max_iter,
                    kind=PlaneKind(ROLE_CONTINUOUS, feature=f.name),
                    seed=seed,
                )
            except FitError as exc:
                failures[f.name] = str(exc)
        else:
            cats = np.argmax(x_prime[:, block], axis=1)
            per_cat: dict[str, Hyperplane] = {}
            for idx, cat in enumerate(f.categories):
                signed = np.where(cats == idx, 1.0, -1.0)
                try:
                    per_cat[cat] = fit_linear_svm(
                        z,
                        signed,
                        c=cfg.svm_c,
                        epochs=cfg.svm_epochs,
                        seed=seed,
                        kind=PlaneKind(ROLE_CATEGORICAL, feature=f.name, positive=cat),
                    )
                except FitError as exc:
                    failures[f"{f.name}={cat}"] = str(exc)
            if per_cat:
                category_planes[f.name] = per_cat
            else:
                failures.setdefault(f.name, "no category plane could be fit")

    bundle = SurrogateBundle(
        autoencoder=ae,
        blackbox=bb,
        schema=schema,
        feature_planes=feature_planes,
        category_planes=category_planes,
        prediction_plane=prediction_plane,
        sample_count=k,
        sampler=sampler,
        seed=seed,
        config=cfg,
        failures=failures,
    )
    bundle.validate()
    return bundle


# --- serialization ---------------------------------------------------------


def _plane_to_dict(plane: Hyperplane) -> dict:
    return {
        "normal": np.asarray(plane.normal, float).tolist(),
        "offset": plane.offset,
        "kind": {
            "role": plane.kind.role,
            "feature": plane.kind.feature,
            "positive": plane.kind.positive,
        },
        "fit_quality": plane.fit_quality,
        "converged": plane.converged,
    }


def _plane_from_dict(doc: dict) -> Hyperplane:
    return Hyperplane(
        normal=np.array(doc["normal"], float),
        offset=float(doc["offset"]),
        kind=PlaneKind(**doc["kind"]),
        fit_quality=float(doc["fit_quality"]),
        converged=bool(doc["converged"]),
    )


def bundle_to_dict(bundle: SurrogateBundle, bindings: dict | None = None) -> dict:
    """Bundle artifact; models are bound by hash (see artifacts module),
    not embedded."""
    return {
        "version": BUNDLE_VERSION,
        "kind": "surrogate-bundle",
        "prediction_plane": _plane_to_dict(bundle.prediction_plane),
        "feature_planes": {
            n: _plane_to_dict(p) for n, p in bundle.feature_planes.items()
        },
        "category_planes": {
            n: {c: _plane_to_dict(p) for c, p in per.items()}
            for n, per in bundle.category_planes.items()
        },
        "sample_count": bundle.sample_count,
        "sampler": {
            "mu": np.asarray(bundle.sampler.mu, float).tolist(),
            "sigma": np.asarray(bundle.sampler.sigma, float).tolist(),
            "c": bundle.sampler.c,
        },
        "seed": bundle.seed,
        "config": {
            "lasso_lambda": bundle.config.lasso_lambda,
            "lasso_tol": bundle.config.lasso_tol,
            "lasso_max_iter": bundle.config.lasso_max_iter,
            "svm_c": bundle.config.svm_c,
            "svm_epochs": bundle.config.svm_epochs,
            "sampler_c": bundle.config.sampler_c,
            "min_prediction_quality": bundle.config.min_prediction_quality,
        },
        "failures": dict(bundle.failures),
        "quality": [
            {"target": t, "category": c, "fit_quality": q, "converged": conv}
            for t, c, q, conv in bundle.quality_table()
        ],
        "bindings": bindings or {},
    }


def bundle_from_dict(
    doc: dict, ae: Autoencoder, bb: BlackBox, schema: DatasetSchema
) -> SurrogateBundle:
    if doc.get("version") != BUNDLE_VERSION or doc.get("kind") != "surrogate-bundle":
        raise SchemaError("not a surrogate bundle artifact")
    cfg = SurrogateConfig(**doc["config"])
    bundle = SurrogateBundle(
        autoencoder=ae,
        blackbox=bb,
        schema=schema,
        feature_planes={
            n: _plane_from_dict(p) for n, p in doc["feature_planes"].items()
        },
        category_planes={
            n: {c: _plane_from_dict(p) for c, p in per.items()}
            for n, per in doc["category_planes"].items()
        },
        prediction_plane=_plane_from_dict(doc["prediction_plane"]),
        sample_count=int(doc["sample_count"]),
        sampler=SamplerConfig(
            mu=np.array(doc["sampler"]["mu"], float),
            sigma=np.array(doc["sampler"]["sigma"], float),
            c=float(doc["sampler"]["c"]),
        ),
        seed=int(doc["seed"]),
        config=cfg,
        failures=dict(doc.get("failures", {})),
    )
    bundle.validate()
    return bundle
