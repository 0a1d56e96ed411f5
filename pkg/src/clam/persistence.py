"""Versioned JSON model files.

Floats are written with ``repr`` precision by :mod:`json`, which round-trips
IEEE doubles exactly, so a saved model reloads bit-identically.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .dynamics import DynamicsConfig, PrototypeSet

SCHEMA = "clam-model"
SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """The file is not a model file this version can read."""


@dataclass
class ModelFile:
    protos: PrototypeSet
    dynamics: DynamicsConfig
    provenance: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.protos.k

    @property
    def d(self) -> int:
        return self.protos.d

    @property
    def standardization(self) -> Optional[tuple]:
        std = self.provenance.get("standardization")
        if std is None:
            return None
        return np.asarray(std["mean"], dtype=np.float64), np.asarray(std["scale"], dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "version": SCHEMA_VERSION,
            "k": self.k,
            "d": self.d,
            "memories": self.protos.memories.tolist(),
            "weights": None if self.protos.weights is None else self.protos.weights.tolist(),
            "dynamics": asdict(self.dynamics),
            "provenance": self.provenance,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, allow_nan=False)
            fh.write("\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelFile":
        if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
            raise SchemaError("not a clam model file (missing or wrong 'schema')")
        if doc.get("version") != SCHEMA_VERSION:
            raise SchemaError(f"unsupported model file version {doc.get('version')!r}; expected {SCHEMA_VERSION}")
        try:
            memories = np.array(doc["memories"], dtype=np.float64)
            protos = PrototypeSet(memories, doc.get("weights"))
            dynamics = DynamicsConfig(**doc["dynamics"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed model file: {exc}") from None
        if protos.k != doc.get("k") or protos.d != doc.get("d"):
            raise SchemaError(f"declared shape k={doc.get('k')}, d={doc.get('d')} does not match memories {memories.shape}")
        return cls(protos, dynamics, dict(doc.get("provenance") or {}))

    @classmethod
    def load(cls, path) -> "ModelFile":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.from_dict(doc)
