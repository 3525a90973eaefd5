"""Capture real service payloads as frontend test fixtures.

Trains a small mixed-type pipeline (two continuous features, one
immutable categorical), serves it through the real HTTP app, and writes
the schema plus one response per interesting case to tests/fixtures/.
Re-run after changing the wire format: python3 scripts/capture_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from recourse_forge.fixtures import make_blobs
from recourse_forge.neural import TrainConfig, train_autoencoder, train_blackbox
from recourse_forge.service import create_app
from recourse_forge.surrogate import build_surrogate
from recourse_forge.tabular import (
    CATEGORICAL,
    DatasetSchema,
    FeatureSpec,
    RawRow,
    encode_table,
    labels_of,
)

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def build_bundle():
    rng = np.random.default_rng(21)
    base_schema, base_rows = make_blobs(400, seed=21)
    features = base_schema.features + (
        FeatureSpec(
            name="grp", kind=CATEGORICAL, categories=("a", "b"), mutable=False
        ),
    )
    schema = DatasetSchema(
        features=features, target_name="label", target_labels=("0", "1")
    )
    rows = [
        RawRow({**r.values, "grp": str(rng.choice(["a", "b"]))}) for r in base_rows
    ]
    x = encode_table(rows, schema)
    y = labels_of(rows, schema)
    bb, _ = train_blackbox(
        x, y, [4, 8, 2], TrainConfig(epochs=200, learning_rate=0.4, seed=3), schema
    )
    ae, _ = train_autoencoder(
        x, [4, 3], TrainConfig(epochs=250, learning_rate=0.4, seed=3), schema
    )
    return build_surrogate(ae, bb, schema, x, k=800, seed=5)


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    bundle = build_bundle()
    client = TestClient(create_app(bundle=bundle))

    schema_doc = client.get("/v1/schema").json()
    (FIXTURES / "schema.json").write_text(json.dumps(schema_doc, indent=2))

    base_row = {"f1": 0.32, "f2": 0.3, "grp": "a"}

    valid_req = {
        "row": base_row,
        "variant": "ce3",
        "free": ["f1", "f2"],
        "d_eps": 0.1,
        "eps_max": 10.0,
        "margin_steps": 0,
        "seed": 1,
    }
    resp = client.post("/v1/explain", json=valid_req)
    assert resp.status_code == 200 and resp.json()["valid"], resp.text
    (FIXTURES / "explain_valid.json").write_text(
        json.dumps({"request": valid_req, "status": 200, "response": resp.json()}, indent=2)
    )

    invalid_req = None
    attempts = []
    for f1 in np.linspace(0.2, 0.45, 26):
        row = {"f1": round(float(f1), 4), "f2": 0.3, "grp": "a"}
        attempts.append({"row": row, "variant": "ce2", "feature": "f1",
                         "d_eps": 0.1, "eps_max": 2.0, "seed": 1})
        attempts.append({"row": row, "variant": "ce1", "d_eps": 0.05,
                         "eps_max": 0.05, "seed": 1})
    for candidate in attempts:
        r = client.post("/v1/explain", json=candidate)
        if r.status_code == 200 and not r.json()["valid"]:
            invalid_req = (candidate, r.json())
            break
    assert invalid_req is not None, "no budget-exhausted case found"
    (FIXTURES / "explain_invalid.json").write_text(
        json.dumps(
            {"request": invalid_req[0], "status": 200, "response": invalid_req[1]},
            indent=2,
        )
    )

    locked_req = {"row": base_row, "variant": "ce3", "free": ["f1", "grp"]}
    resp = client.post("/v1/explain", json=locked_req)
    assert resp.status_code == 422, resp.text
    (FIXTURES / "explain_422.json").write_text(
        json.dumps({"request": locked_req, "status": 422, "response": resp.json()}, indent=2)
    )

    missing_req = {"row": {"f1": 0.32, "grp": "a"}}
    resp = client.post("/v1/explain", json=missing_req)
    assert resp.status_code == 400, resp.text
    (FIXTURES / "explain_400.json").write_text(
        json.dumps({"request": missing_req, "status": 400, "response": resp.json()}, indent=2)
    )

    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
