"""Run configuration: one JSON document describing data, model, training and masks.

Example::

    {"schema_version": 1, "seed": 0, "topology": "default22",
     "data": {"source": "synthetic", "synthetic": {"count": 200}},
     "model": {"patch_scheme": "S3"},
     "train": {"steps": 2000, "lr": 3e-4},
     "mask": {"kind": "inbetween", "past": 10, "transition": 15, "future": 1},
     "output_dir": "runs/demo"}

Every section is optional; unknown keys anywhere are rejected.  ``train.mask``
defaults to the top-level ``mask``, which is also what ``eval`` and
``synthesize`` use.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .kinematics import SkeletonTopology, default_topology
from .masking import MaskParameterError, MaskSpec
from .model import ConfigError, ModelConfig
from .synthetic import SyntheticGaitParams
from .trainer import TrainConfig

SCHEMA_VERSION = 1
SOURCES = ("synthetic", "motion_dir", "bvh_dir")


@dataclass
class DataConfig:
    source: str = "synthetic"
    path: str | None = None
    synthetic: SyntheticGaitParams = field(default_factory=SyntheticGaitParams)
    test_fraction: float = 0.2   # bvh_dir only: share of files held out for testing
    unit_scale: float = 1000.0   # data units -> reported MPJPE units (metres -> mm)

    def __post_init__(self):
        if isinstance(self.synthetic, dict):
            self.synthetic = SyntheticGaitParams.from_dict(self.synthetic)
        if self.source not in SOURCES:
            raise ConfigError(f"data.source must be one of {SOURCES}, got {self.source!r}")
        if self.source != "synthetic" and not self.path:
            raise ConfigError(f"data.source={self.source!r} needs data.path")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("data.test_fraction must lie in (0, 1)")
        if self.unit_scale <= 0:
            raise ConfigError("data.unit_scale must be > 0")

    def to_dict(self) -> dict:
        return {"source": self.source, "path": self.path, "synthetic": self.synthetic.to_dict(),
                "test_fraction": self.test_fraction, "unit_scale": self.unit_scale}


def _check_keys(d: dict, allowed, section: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{section} must be a JSON object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {sorted(unknown)}")


@dataclass
class RunConfig:
    seed: int = 0
    topology: SkeletonTopology = field(default_factory=default_topology)
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    mask: MaskSpec = field(default_factory=MaskSpec)
    output_dir: str = "runs/unimask"

    def to_dict(self) -> dict:
        topo = "default22" if self.topology == default_topology() else self.topology.to_dict()
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "topology": topo,
            "data": self.data.to_dict(),
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "mask": self.mask.to_dict(),
            "output_dir": self.output_dir,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        """Validate and build; raises :class:`ConfigError` on any schema violation."""
        _check_keys(d, {"schema_version", "seed", "topology", "data", "model", "train", "mask",
                        "output_dir"}, "config")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
        d = copy.deepcopy(d)
        try:
            topo = d.get("topology", "default22")
            if topo == "default22":
                topology = default_topology()
            elif isinstance(topo, dict):
                _check_keys(topo, {"name", "names", "parents", "offsets"}, "topology")
                topology = SkeletonTopology.from_dict(topo)
            else:
                raise ConfigError(f"topology must be 'default22' or an inline skeleton, got {topo!r}")

            data = d.get("data", {})
            _check_keys(data, {f.name for f in fields(DataConfig)}, "data")
            data = DataConfig(**data)

            mask = d.get("mask", {})
            _check_keys(mask, {f.name for f in fields(MaskSpec)} - {"visibility"}, "mask")
            mask = MaskSpec(**mask)

            model = d.get("model", {})
            _check_keys(model, {f.name for f in fields(ModelConfig)}, "model")
            model = ModelConfig.from_dict({"num_joints": topology.num_joints, **model})

            train = dict(d.get("train", {}))
            _check_keys(train, {f.name for f in fields(TrainConfig)}, "train")
            if "mask" in train:
                _check_keys(train["mask"], {f.name for f in fields(MaskSpec)} - {"visibility"}, "train.mask")
            train.setdefault("mask", mask.to_dict())
            train.setdefault("seed", d.get("seed", 0))
            train = TrainConfig.from_dict(train)
        except (TypeError, MaskParameterError) as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(int(d.get("seed", 0)), topology, data, model, train, mask,
                   str(d.get("output_dir", "runs/unimask")))

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(doc)

    def with_overrides(self, **overrides) -> "RunConfig":
        """A new config with command-line style overrides applied (``None`` = keep)."""
        d = self.to_dict()
        mask_keys = {"kind", "p", "transition", "past", "future", "t_obs", "horizon"}
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "seed":
                d["seed"] = value
                d["train"]["seed"] = value
                d["model"]["seed"] = value
            elif key in mask_keys:
                d["mask"][key] = value
                d["train"]["mask"][key] = value
            elif key in ("steps", "lr", "batch_size", "warmup_steps", "eval_every"):
                d["train"][key] = value
            elif key == "data":
                d["data"]["source"] = "bvh_dir" if value.endswith("bvh") or _has_bvh(value) else "motion_dir"
                d["data"]["path"] = value
            elif key == "output_dir":
                d["output_dir"] = value
            else:
                raise ConfigError(f"unsupported override {key!r}")
        return RunConfig.from_dict(d)


def _has_bvh(path: str) -> bool:
    p = Path(path)
    return p.is_dir() and any(p.glob("*.bvh"))
