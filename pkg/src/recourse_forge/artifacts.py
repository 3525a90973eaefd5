"""Artifact persistence: canonical JSON files, content hashes, manifests.

Every trained artifact is one JSON file written canonically (sorted keys,
stable float repr) so identical inputs produce byte-identical files. The
manifest lists each artifact with its sha256; the surrogate bundle binds
to the exact model files it was fit against by those hashes, and loading
refuses to combine mismatched artifacts.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ArtifactError
from .neural import (
    Autoencoder,
    BlackBox,
    autoencoder_from_dict,
    autoencoder_to_dict,
    blackbox_from_dict,
    blackbox_to_dict,
)
from .surrogate import SurrogateBundle, bundle_from_dict, bundle_to_dict
from .tabular import DatasetSchema, schema_from_dict, schema_to_dict

MANIFEST_VERSION = 1


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_json(doc: dict, path: Path) -> str:
    """Write canonical JSON; returns the file's sha256 hex digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = canonical_json(doc).encode("utf-8")
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_json(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: not valid JSON ({exc})") from None


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_schema(schema: DatasetSchema, path: Path) -> str:
    return write_json(schema_to_dict(schema), path)


def load_schema(path: Path) -> DatasetSchema:
    return schema_from_dict(read_json(path))


def save_blackbox(bb: BlackBox, path: Path, meta: dict | None = None) -> str:
    return write_json(blackbox_to_dict(bb, meta), path)


def load_blackbox(path: Path) -> BlackBox:
    return blackbox_from_dict(read_json(path))


def save_autoencoder(ae: Autoencoder, path: Path, meta: dict | None = None) -> str:
    return write_json(autoencoder_to_dict(ae, meta), path)


def load_autoencoder(path: Path) -> Autoencoder:
    return autoencoder_from_dict(read_json(path))


def write_manifest(artifacts_dir: Path, entries: dict[str, Path]) -> Path:
    """entries: name -> artifact path (relative paths stored)."""
    artifacts_dir = Path(artifacts_dir)
    doc = {
        "version": MANIFEST_VERSION,
        "artifacts": {
            name: {
                "path": str(Path(path).name),
                "sha256": file_sha256(path),
            }
            for name, path in entries.items()
        },
    }
    manifest_path = artifacts_dir / "manifest.json"
    write_json(doc, manifest_path)
    return manifest_path


def read_manifest(artifacts_dir: Path) -> dict:
    return read_json(Path(artifacts_dir) / "manifest.json")


def verify_manifest(artifacts_dir: Path) -> dict[str, Path]:
    """Check every listed artifact's hash; returns name -> resolved path."""
    artifacts_dir = Path(artifacts_dir)
    doc = read_manifest(artifacts_dir)
    resolved = {}
    for name, entry in doc["artifacts"].items():
        path = artifacts_dir / entry["path"]
        if not path.exists():
            raise ArtifactError(f"artifact mismatch: {name} missing at {path}")
        if file_sha256(path) != entry["sha256"]:
            raise ArtifactError(
                f"artifact mismatch: {name} at {path} does not match its manifest hash"
            )
        resolved[name] = path
    return resolved


def save_bundle(
    bundle: SurrogateBundle,
    path: Path,
    schema_path: Path,
    blackbox_path: Path,
    autoencoder_path: Path,
) -> str:
    """Persist the bundle bound by hash to the exact artifacts it was fit on."""
    path = Path(path)
    bindings = {
        "schema": {"path": str(Path(schema_path).name), "sha256": file_sha256(schema_path)},
        "blackbox": {
            "path": str(Path(blackbox_path).name),
            "sha256": file_sha256(blackbox_path),
        },
        "autoencoder": {
            "path": str(Path(autoencoder_path).name),
            "sha256": file_sha256(autoencoder_path),
        },
    }
    return write_json(bundle_to_dict(bundle, bindings), path)


def load_bundle(path: Path) -> SurrogateBundle:
    """Load a bundle plus its bound artifacts (siblings of the bundle file),
    refusing any artifact whose hash changed since the fit."""
    path = Path(path)
    doc = read_json(path)
    bindings = doc.get("bindings", {})
    for name in ("schema", "blackbox", "autoencoder"):
        if name not in bindings:
            raise ArtifactError(f"bundle lacks a binding for {name}")
    base = path.parent
    resolved = {}
    for name, entry in bindings.items():
        target = base / entry["path"]
        if not target.exists():
            raise ArtifactError(f"artifact mismatch: {name} missing at {target}")
        if file_sha256(target) != entry["sha256"]:
            raise ArtifactError(
                f"artifact mismatch: {name} at {target} has changed since the bundle was fit"
            )
        resolved[name] = target
    schema = load_schema(resolved["schema"])
    bb = load_blackbox(resolved["blackbox"])
    ae = load_autoencoder(resolved["autoencoder"])
    return bundle_from_dict(doc, ae=ae, bb=bb, schema=schema)
