"""Command-line driver: train, fit, explain, evaluate, serve.

Exit codes: 0 success, 1 domain failure (divergence, no valid
counterfactual), 2 usage or IO error (missing files, artifact mismatch,
malformed requests). The artifacts directory can be overridden with the
RECOURSE_FORGE_DIR environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .errors import (
    ArtifactError,
    ExplainFailure,
    ExplainRequestError,
    FitError,
    IngestError,
    RecourseError,
    SchemaError,
    TrainingError,
)
from .explain import ExplainRequest, explain
from .fixtures import write_blobs_csv
from .metrics import evaluate, evaluate_robustness
from .neural import TrainConfig, train_autoencoder, train_blackbox
from .report import (
    render_sweep_table,
    render_text_table,
    write_report_files,
    write_robustness_files,
)
from .surrogate import SurrogateConfig, build_surrogate
from .tabular import (
    CONTINUOUS,
    DatasetSchema,
    RawRow,
    SchemaHints,
    encode_table,
    ingest_csv,
    labels_of,
)

USAGE_ERROR = 2
DOMAIN_ERROR = 1

_USAGE_ERRORS = (IngestError, ArtifactError, SchemaError, ExplainRequestError)
_DOMAIN_ERRORS = (TrainingError, FitError, ExplainFailure)


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise IngestError(f"file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(f"{p}: invalid JSON ({exc})") from None


def _artifacts_dir(cfg: dict, config_path: str) -> Path:
    override = os.environ.get("RECOURSE_FORGE_DIR")
    raw = override or cfg.get("artifacts_dir", "artifacts")
    base = Path(raw)
    if not base.is_absolute():
        base = Path(config_path).resolve().parent / base
    return base


def _data_path(cfg: dict, config_path: str) -> Path:
    raw = cfg.get("data_csv")
    if not raw:
        raise IngestError("config is missing data_csv")
    path = Path(raw)
    if not path.is_absolute():
        path = Path(config_path).resolve().parent / path
    if not path.exists():
        raise IngestError(f"file not found: {path}")
    return path


def _ingest(cfg: dict, config_path: str):
    hints = SchemaHints(
        target=cfg.get("target"),
        kinds=cfg.get("kinds", {}),
        mutable={name: False for name in cfg.get("immutable", [])},
        max_categories=int(cfg.get("max_categories", 20)),
    )
    return ingest_csv(_data_path(cfg, config_path), hints)


def read_rows_for_schema(path: Path, schema: DatasetSchema) -> list[RawRow]:
    """Parse a CSV against an existing schema (no re-inference)."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError("empty file") from None
        for f in schema.features:
            if f.name not in header:
                raise IngestError(f"missing column: {f.name!r}")
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            record = dict(zip(header, (c.strip() for c in cells)))
            values: dict[str, str | float] = {}
            for f in schema.features:
                cell = record[f.name]
                if f.kind == CONTINUOUS:
                    try:
                        values[f.name] = float(cell)
                    except ValueError:
                        raise IngestError(
                            f"row {lineno}, column {f.name!r}: {cell!r} is not a number"
                        ) from None
                else:
                    values[f.name] = cell
            if schema.target_name in record:
                values[schema.target_name] = record[schema.target_name]
            rows.append(RawRow(values))
    if not rows:
        raise IngestError("empty file")
    return rows


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    outdir = _artifacts_dir(cfg, args.config)
    schema, rows = _ingest(cfg, args.config)
    x = encode_table(rows, schema)
    y = labels_of(rows, schema)

    bb_cfg = cfg.get("blackbox", {})
    bb_train = TrainConfig(
        epochs=int(bb_cfg.get("epochs", 300)),
        batch_size=int(bb_cfg.get("batch_size", 32)),
        learning_rate=float(bb_cfg.get("learning_rate", 0.5)),
        seed=int(bb_cfg.get("seed", 7)),
    )
    arch = [schema.encoded_width, *bb_cfg.get("hidden", [16]), len(schema.target_labels)]
    bb, accuracy = train_blackbox(x, y, arch, bb_train, schema)

    ae_cfg = cfg.get("autoencoder", {})
    ae_train = TrainConfig(
        epochs=int(ae_cfg.get("epochs", 400)),
        batch_size=int(ae_cfg.get("batch_size", 32)),
        learning_rate=float(ae_cfg.get("learning_rate", 0.5)),
        seed=int(ae_cfg.get("seed", 7)),
    )
    latent_dim = int(ae_cfg.get("latent_dim", max(2, schema.encoded_width // 2)))
    enc_arch = [schema.encoded_width, *ae_cfg.get("hidden", []), latent_dim]
    ae, recon = train_autoencoder(x, enc_arch, ae_train, schema)

    schema_path = outdir / "schema.json"
    bb_path = outdir / "blackbox.json"
    ae_path = outdir / "autoencoder.json"
    artifacts.save_schema(schema, schema_path)
    artifacts.save_blackbox(
        bb, bb_path, meta={"arch": arch, "val_accuracy": accuracy, "seed": bb_train.seed}
    )
    artifacts.save_autoencoder(
        ae,
        ae_path,
        meta={"encoder_arch": enc_arch, "recon_loss": recon, "seed": ae_train.seed},
    )
    manifest = artifacts.write_manifest(
        outdir, {"schema": schema_path, "blackbox": bb_path, "autoencoder": ae_path}
    )
    print(f"blackbox validation accuracy: {accuracy:.4f}")
    print(f"autoencoder reconstruction loss: {recon:.6f}")
    for name, entry in artifacts.read_manifest(outdir)["artifacts"].items():
        print(f"{name}: {entry['path']}  sha256={entry['sha256'][:16]}...")
    print(f"manifest: {manifest}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    outdir = _artifacts_dir(cfg, args.config)
    resolved = artifacts.verify_manifest(outdir)
    schema = artifacts.load_schema(resolved["schema"])
    bb = artifacts.load_blackbox(resolved["blackbox"])
    ae = artifacts.load_autoencoder(resolved["autoencoder"])

    _, rows = _ingest(cfg, args.config)
    x = encode_table(rows, schema)

    s_cfg = cfg.get("surrogate", {})
    config = SurrogateConfig(
        lasso_lambda=float(s_cfg.get("lasso_lambda", 1e-3)),
        svm_c=float(s_cfg.get("svm_c", 1.0)),
        sampler_c=float(s_cfg.get("sampler_c", 3.0)),
    )
    k = s_cfg.get("k")
    bundle = build_surrogate(
        ae,
        bb,
        schema,
        x,
        k=int(k) if k else None,
        config=config,
        seed=int(s_cfg.get("seed", 11)),
    )
    bundle_path = outdir / "bundle.json"
    artifacts.save_bundle(
        bundle,
        bundle_path,
        schema_path=resolved["schema"],
        blackbox_path=resolved["blackbox"],
        autoencoder_path=resolved["autoencoder"],
    )
    print(f"samples: {bundle.sample_count}   latent dim: {bundle.latent_dim}")
    print(f"{'target':<20} {'category':<12} {'quality':<9} converged")
    for target, cat, quality, converged in bundle.quality_table():
        print(f"{target:<20} {cat:<12} {quality:<9.4f} {converged}")
    for name, reason in bundle.failures.items():
        print(f"fit failure: {name}: {reason}")
    print(f"bundle: {bundle_path}")
    return 0


def _parse_row_arg(args: argparse.Namespace, schema: DatasetSchema) -> RawRow:
    if args.row_json:
        try:
            doc = json.loads(args.row_json)
        except json.JSONDecodeError as exc:
            raise ExplainRequestError(f"--row-json is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ExplainRequestError("--row-json must be a JSON object")
        return RawRow(doc)
    if args.csv:
        rows = read_rows_for_schema(Path(args.csv), schema)
        if not (0 <= args.index < len(rows)):
            raise ExplainRequestError(
                f"--index {args.index} out of range for {len(rows)} rows"
            )
        return rows[args.index]
    raise ExplainRequestError("provide --row-json or --csv with --index")


def _request_from_args(args: argparse.Namespace, row: RawRow) -> ExplainRequest:
    free = tuple(s for s in (args.free or "").split(",") if s)
    try:
        d_eps = float(args.d_eps)
    except ValueError:
        raise ExplainRequestError(f"--d-eps must be a number, got {args.d_eps!r}") from None
    return ExplainRequest(
        row=row,
        variant=args.variant,
        target_feature=args.feature,
        free_features=free,
        d_eps=d_eps,
        eps_max=args.eps_max,
        robust_margin_steps=args.margin_steps,
        seed=args.seed,
    )


def cmd_explain(args: argparse.Namespace) -> int:
    bundle = artifacts.load_bundle(Path(args.bundle))
    row = _parse_row_arg(args, bundle.schema)
    req = _request_from_args(args, row)
    result = explain(bundle, req)
    print(json.dumps(result.to_dict(), indent=2))
    return 0 if result.valid else DOMAIN_ERROR


def cmd_evaluate(args: argparse.Namespace) -> int:
    bundle = artifacts.load_bundle(Path(args.bundle))
    rows = read_rows_for_schema(Path(args.test_csv), bundle.schema)
    try:
        d_eps_values = [float(v) for v in args.d_eps.split(",") if v]
    except ValueError:
        raise ExplainRequestError(
            f"--d-eps must be a number or comma list, got {args.d_eps!r}"
        ) from None
    if not d_eps_values:
        raise ExplainRequestError("--d-eps must name at least one value")
    outdir = Path(args.out) if args.out else None

    if len(d_eps_values) > 1:
        sweep = evaluate_robustness(
            bundle,
            rows,
            d_eps_values,
            perturb_scale=args.perturb_scale,
            seed=args.seed,
        )
        if args.json:
            doc = {
                str(d): {
                    "robustness_pct": p.robustness_pct,
                    "mean_proximity": p.mean_proximity,
                    "n_valid": p.n_valid,
                }
                for d, p in sweep.items()
            }
            print(json.dumps(doc, indent=2))
        else:
            print(render_sweep_table(sweep), end="")
        if outdir:
            for path in write_robustness_files(sweep, outdir):
                print(f"wrote {path}", file=sys.stderr)
        return 0

    free = tuple(s for s in (args.free or "").split(",") if s)
    overrides = dict(
        variant=args.variant,
        target_feature=args.feature,
        free_features=free,
        d_eps=d_eps_values[0],
        eps_max=args.eps_max,
        robust_margin_steps=args.margin_steps,
    )
    # fail fast on a misconfigured request instead of reporting 0% validity
    ExplainRequest(
        row=rows[0],
        variant=args.variant,
        target_feature=args.feature,
        free_features=free,
        d_eps=d_eps_values[0],
        eps_max=args.eps_max,
        robust_margin_steps=args.margin_steps,
    ).validate(bundle.schema)
    reports = []
    for r in range(max(1, args.repeats)):
        template = ExplainRequest(row=rows[0], seed=args.seed + 1000 * r)
        reports.append(evaluate(bundle, rows, request_template=template, **overrides))
    first = reports[0]
    if args.repeats > 1:
        for name in ("validity_pct", "mean_sparsity", "mean_proximity", "mean_runtime_us"):
            vals = np.array([getattr(rep, name) for rep in reports])
            print(f"{name}: {vals.mean():.4f} +- {vals.std():.4f}")
    elif args.json:
        print(json.dumps(first.to_dict(), indent=2))
    else:
        print(render_text_table(first), end="")
    if outdir:
        for path in write_report_files(first, outdir):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    bundle = artifacts.load_bundle(Path(args.bundle)) if args.bundle else None
    static = Path(args.static) if args.static else None
    app = create_app(bundle=bundle, static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_demo_data(args: argparse.Namespace) -> int:
    path = write_blobs_csv(Path(args.out), n=args.rows, seed=args.seed)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recourse-forge",
        description="Counterfactual explanations via latent-space hyperplane search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the black box and autoencoder")
    p_train.add_argument("--config", required=True)
    p_train.set_defaults(fn=cmd_train)

    p_fit = sub.add_parser("fit", help="fit the surrogate hyperplane bundle")
    p_fit.add_argument("--config", required=True)
    p_fit.set_defaults(fn=cmd_fit)

    def add_explain_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--variant", choices=["ce1", "ce2", "ce3"], default="ce1")
        p.add_argument("--feature", help="target feature for ce2")
        p.add_argument("--free", help="comma-separated free features for ce3")
        p.add_argument("--d-eps", dest="d_eps", default="0.1")
        p.add_argument("--eps-max", dest="eps_max", type=float, default=10.0)
        p.add_argument("--margin-steps", dest="margin_steps", type=int, default=0)
        p.add_argument("--seed", type=int, default=0)

    p_explain = sub.add_parser("explain", help="explain one row")
    p_explain.add_argument("--bundle", required=True)
    p_explain.add_argument("--row-json", dest="row_json")
    p_explain.add_argument("--csv")
    p_explain.add_argument("--index", type=int, default=0)
    add_explain_flags(p_explain)
    p_explain.set_defaults(fn=cmd_explain)

    p_eval = sub.add_parser("evaluate", help="evaluate over a test CSV")
    p_eval.add_argument("--bundle", required=True)
    p_eval.add_argument("--test-csv", dest="test_csv", required=True)
    p_eval.add_argument("--repeats", type=int, default=1)
    p_eval.add_argument("--perturb-scale", dest="perturb_scale", type=float, default=0.05)
    p_eval.add_argument("--out", help="directory for report files and figures")
    p_eval.add_argument("--json", action="store_true")
    p_eval.add_argument("--table", action="store_true")
    add_explain_flags(p_eval)
    p_eval.set_defaults(fn=cmd_evaluate)

    p_serve = sub.add_parser("serve", help="serve the HTTP explanation API")
    p_serve.add_argument("--bundle")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--static", help="directory of UI assets to serve at /")
    p_serve.set_defaults(fn=cmd_serve)

    p_demo = sub.add_parser("demo-data", help="write the synthetic blobs CSV")
    p_demo.add_argument("--out", required=True)
    p_demo.add_argument("--rows", type=int, default=500)
    p_demo.add_argument("--seed", type=int, default=7)
    p_demo.set_defaults(fn=cmd_demo_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_ERROR
    except RecourseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
