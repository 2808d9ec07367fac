"""Model bundle persistence: one file holding everything annotation needs.

Layout: 4-byte magic, little-endian uint32 format version, uint64 header
length, a canonical JSON header (sorted keys, compact separators), then
raw little-endian float64 blobs for each matrix named in the header, each
prefixed with uint32 rank and uint64 dimensions.  The header is readable
with `head -c`; the blobs keep numerics exact.  Serialization is a pure
function of the bundle contents, so load followed by save is
byte-identical and equal bundles hash identically.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .descriptor import DescriptorConfig
from .errors import BundleFormatError, ContractViolation
from .padding import PaddingClassifier, PaddingStrategy, StrategyMap
from .plsa import PlsaModel
from .segmenter import SegmenterConfig

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "ModelBundle",
    "bundle_digest",
    "load_bundle",
    "save_bundle",
]

MAGIC = b"SCNB"
FORMAT_VERSION = 1

# fixed blob order; the header repeats it for human readers
_MATRICES = (
    "p_f_given_z",
    "p_z_given_r",
    "p_r",
    "loglik_trace",
    "weights",
    "feature_mean",
    "feature_std",
)

_COMBOS = ("O/O", "Z/Z", "O/Z", "Z/O")


@dataclass(frozen=True)
class ModelBundle:
    """Trained pipeline state: topic model, padding policy, configs, names."""

    model: PlsaModel
    strategy_map: StrategyMap
    classifier: PaddingClassifier
    descriptor_config: DescriptorConfig = field(default_factory=DescriptorConfig)
    segmenter_config: SegmenterConfig = field(default_factory=SegmenterConfig)
    topic_categories: dict[int, int] = field(default_factory=dict)
    category_names: dict[int, str] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "topic_categories",
            {int(k): int(v) for k, v in self.topic_categories.items()},
        )
        object.__setattr__(
            self, "category_names",
            {int(k): str(v) for k, v in self.category_names.items()},
        )
        missing = [k for k in range(self.model.k) if k not in self.topic_categories]
        if missing:
            raise ContractViolation(f"topic_categories missing topics {missing}")
        try:
            json.dumps(self.provenance, sort_keys=True)
        except (TypeError, ValueError) as exc:
            raise ContractViolation(f"provenance must be JSON-serializable: {exc}") from exc


def _nan_to_null(value: float):
    return None if value != value else float(value)


def _null_to_nan(value) -> float:
    return float("nan") if value is None else float(value)


def _header_dict(bundle: ModelBundle) -> dict:
    model = bundle.model
    clf = bundle.classifier
    return {
        "format": "scene-annotate-bundle",
        "matrices": list(_MATRICES),
        "model": {
            "k": model.k,
            "seed": model.seed,
            "iterations": model.iterations,
            "tol": model.tol,
            "restarts": model.restarts,
            "warnings": list(model.warnings),
        },
        "strategy_map": {
            "entries": {str(c): s.value for c, s in bundle.strategy_map.entries.items()},
            "counts": {
                str(c): {combo: int(row.get(combo, 0)) for combo in _COMBOS}
                for c, row in bundle.strategy_map.counts.items()
            },
            "totals": {str(c): int(n) for c, n in bundle.strategy_map.totals.items()},
        },
        "classifier": {
            "bias": clf.bias,
            "reg": clf.reg,
            "epochs": clf.epochs,
            "seed": clf.seed,
            "degenerate": clf.degenerate,
            "train_accuracy": _nan_to_null(clf.train_accuracy),
        },
        "descriptor_config": {
            "block_size": bundle.descriptor_config.block_size,
            "edge_threshold": bundle.descriptor_config.edge_threshold,
        },
        "segmenter_config": {
            "tm": bundle.segmenter_config.tm,
            "window_sizes": list(bundle.segmenter_config.window_sizes),
            "j_threshold": bundle.segmenter_config.j_threshold,
            "min_region_px": bundle.segmenter_config.min_region_px,
        },
        "topic_categories": {str(k): v for k, v in bundle.topic_categories.items()},
        "category_names": {str(k): v for k, v in bundle.category_names.items()},
        "provenance": bundle.provenance,
    }


def _matrix_blobs(bundle: ModelBundle) -> dict[str, np.ndarray]:
    return {
        "p_f_given_z": np.asarray(bundle.model.p_f_given_z, dtype=np.float64),
        "p_z_given_r": np.asarray(bundle.model.p_z_given_r, dtype=np.float64),
        "p_r": np.asarray(bundle.model.p_r, dtype=np.float64),
        "loglik_trace": np.asarray(bundle.model.loglik_trace, dtype=np.float64),
        "weights": np.asarray(bundle.classifier.weights, dtype=np.float64),
        "feature_mean": np.asarray(bundle.classifier.feature_mean, dtype=np.float64),
        "feature_std": np.asarray(bundle.classifier.feature_std, dtype=np.float64),
    }


def save_bundle(bundle: ModelBundle, path) -> None:
    """Serialize to the binary layout, atomically (temp file + rename)."""
    path = Path(path)
    header = json.dumps(_header_dict(bundle), sort_keys=True, separators=(",", ":"))
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    encoded = header.encode("utf-8")
    blob += struct.pack("<Q", len(encoded))
    blob += encoded
    for name in _MATRICES:
        arr = _matrix_blobs(bundle)[name]
        blob += struct.pack("<I", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        blob += arr.astype("<f8").tobytes(order="C")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(bytes(blob))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise BundleFormatError(f"bundle {self.path} is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_bundle(path) -> ModelBundle:
    """Parse a bundle file; wrong magic, version, or layout refuses loudly."""
    path = Path(path)
    if not path.is_file():
        raise BundleFormatError(f"bundle {path} does not exist")
    reader = _Reader(path.read_bytes(), path)

    magic = reader.take(4)
    if magic != MAGIC:
        raise BundleFormatError(f"bundle {path} has wrong magic {magic!r}")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise BundleFormatError(
            f"bundle {path} has format version {version}; this reader supports {FORMAT_VERSION}"
        )
    (header_len,) = reader.unpack("<Q")
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleFormatError(f"bundle {path} header is not valid JSON: {exc}") from exc
    if header.get("matrices") != list(_MATRICES):
        raise BundleFormatError(f"bundle {path} header lists unexpected matrices")

    blobs = {}
    for name in _MATRICES:
        (ndim,) = reader.unpack("<I")
        if ndim > 2:
            raise BundleFormatError(f"bundle {path}: matrix {name} has rank {ndim}")
        shape = reader.unpack(f"<{ndim}Q")
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        raw = reader.take(count * 8)
        blobs[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if reader.pos != len(reader.data):
        raise BundleFormatError(f"bundle {path} has {len(reader.data) - reader.pos} trailing bytes")

    try:
        m = header["model"]
        model = PlsaModel(
            k=int(m["k"]),
            p_f_given_z=blobs["p_f_given_z"],
            p_z_given_r=blobs["p_z_given_r"],
            p_r=blobs["p_r"],
            loglik_trace=tuple(float(v) for v in blobs["loglik_trace"]),
            seed=int(m["seed"]),
            iterations=int(m["iterations"]),
            tol=float(m["tol"]),
            restarts=int(m["restarts"]),
            warnings=tuple(m["warnings"]),
        )
        sm = header["strategy_map"]
        strategy_map = StrategyMap(
            entries={int(c): PaddingStrategy(v) for c, v in sm["entries"].items()},
            counts={
                int(c): {combo: int(n) for combo, n in row.items()}
                for c, row in sm["counts"].items()
            },
            totals={int(c): int(n) for c, n in sm["totals"].items()},
        )
        c = header["classifier"]
        classifier = PaddingClassifier(
            weights=blobs["weights"],
            bias=float(c["bias"]),
            feature_mean=blobs["feature_mean"],
            feature_std=blobs["feature_std"],
            reg=float(c["reg"]),
            epochs=int(c["epochs"]),
            seed=int(c["seed"]),
            degenerate=bool(c["degenerate"]),
            train_accuracy=_null_to_nan(c["train_accuracy"]),
        )
        d = header["descriptor_config"]
        s = header["segmenter_config"]
        bundle = ModelBundle(
            model=model,
            strategy_map=strategy_map,
            classifier=classifier,
            descriptor_config=DescriptorConfig(
                block_size=int(d["block_size"]),
                edge_threshold=float(d["edge_threshold"]),
            ),
            segmenter_config=SegmenterConfig(
                tm=float(s["tm"]),
                window_sizes=tuple(int(w) for w in s["window_sizes"]),
                j_threshold=None if s["j_threshold"] is None else float(s["j_threshold"]),
                min_region_px=int(s["min_region_px"]),
            ),
            topic_categories={int(k): int(v) for k, v in header["topic_categories"].items()},
            category_names={int(k): v for k, v in header["category_names"].items()},
            provenance=header["provenance"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleFormatError(f"bundle {path} header is malformed: {exc}") from exc
    return bundle


def bundle_digest(path) -> str:
    """SHA-256 of the bundle file, for determinism checks and provenance."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
