"""Run configuration shared by the CLI and the grid runner."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import DynamicsConfig
from .training import MaskSpec, TrainConfig

# tuned settings for the bundled datasets
PRESETS = {
    "zoo": dict(k=7, beta=2.4, steps=10, lr=0.1, batch=8, mask_prob=0.2, mask_fill="mean"),
    "ecoli": dict(k=8, beta=0.095, steps=12, lr=0.1, batch=16, mask_prob=0.15, mask_fill="mean"),
}


@dataclass(frozen=True)
class RunConfig:
    data: Optional[str] = None
    label_column: Optional[str] = None
    standardize: str = "auto"
    k: Optional[int] = None
    beta: float = 1.0
    steps: int = 10
    step_factor: Optional[float] = None
    metric: str = "euclidean"
    lr: float = 0.1
    batch: int = 8
    epochs: int = 200
    restarts: int = 10
    mask_prob: float = 0.15
    mask_fill: str = "mean"
    variant: str = "masked"
    train_weights: bool = False
    lr_factor: float = 0.8
    lr_patience: int = 5
    min_lr: float = 1e-5
    lr_threshold: float = 1e-3
    seed: int = 0
    out: str = "clam-run"

    def __post_init__(self):
        if self.standardize not in ("auto", "on", "off"):
            raise ValueError("standardize must be auto, on or off")

    def dynamics(self) -> DynamicsConfig:
        return DynamicsConfig(self.beta, self.steps, self.step_factor, self.metric)

    def mask_spec(self) -> MaskSpec:
        return MaskSpec(self.mask_prob, self.mask_fill, self.seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch, max_epochs=self.epochs, restarts=self.restarts,
            initial_lr=self.lr, lr_reduce_factor=self.lr_factor,
            lr_patience_epochs=self.lr_patience, min_lr=self.min_lr,
            lr_loss_threshold=self.lr_threshold, variant=self.variant,
            train_weights=self.train_weights, seed=self.seed)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FIELD_NAMES = {f.name for f in fields(RunConfig)}


def dataset_key(data: Optional[str]) -> Optional[str]:
    """Preset name for a bundled name or a path whose stem matches one."""
    if not data:
        return None
    stem = Path(data).stem.lower()
    return stem if stem in PRESETS else None


def read_toml(path) -> dict:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    doc = doc.get("run", doc)
    unknown = set(doc) - FIELD_NAMES
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    return doc


def build(overrides: dict, toml_path=None) -> RunConfig:
    """Defaults, then the dataset preset, then the TOML file, then ``overrides``
    (entries that are None are ignored)."""
    file_values = read_toml(toml_path) if toml_path else {}
    explicit = {k: v for k, v in overrides.items() if v is not None}
    data = explicit.get("data", file_values.get("data"))
    merged = dict(PRESETS.get(dataset_key(data), {}))
    merged.update(file_values)
    merged.update(explicit)
    return replace(RunConfig(), **merged)
