"""Experiment configuration documents (JSON)."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any

from .channel import CouplingKind, PortGeometry

KINDS = ("snr-sweep", "port-sweep", "los-compare", "allocate", "validate")


@dataclass(frozen=True)
class CouplingSpec:
    kind: str = CouplingKind.SEPARABLE_RAYLEIGH.value
    k_factor_db: float | None = None

    def __post_init__(self):
        CouplingKind(self.kind)


@dataclass(frozen=True)
class Baselines:
    """Fixed half-wavelength array and i.i.d. array baselines.

    ``fixed_count=None`` means ``2W + 1`` elements over the FAS aperture.
    """

    fixed: bool = True
    fixed_count: int | None = None
    iid: bool = True
    iid_counts: tuple[int, ...] = (5, 10, 15, 20, 25)

    def __post_init__(self):
        object.__setattr__(self, "iid_counts", tuple(int(m) for m in self.iid_counts))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "snr-sweep"
    geometry: PortGeometry = field(default_factory=lambda: PortGeometry(8, 8, 1.0, 1.0))
    coupling: CouplingSpec = field(default_factory=CouplingSpec)
    snr_grid_db: tuple[float, ...] = tuple(float(x) for x in range(-10, 31, 5))
    port_grid: tuple[int, ...] = (2, 4, 8, 16)
    fixed_snr_db: float = 20.0
    los_k_factor_db: float = 6.0
    n_trials: int = 100_000
    seed: int = 0
    optimize: bool = True
    baselines: Baselines = field(default_factory=Baselines)
    output_path: str = "-"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        object.__setattr__(self, "snr_grid_db", tuple(float(x) for x in self.snr_grid_db))
        object.__setattr__(self, "port_grid", tuple(int(n) for n in self.port_grid))
        if self.kind in ("snr-sweep", "los-compare", "allocate") and not self.snr_grid_db:
            raise ValueError(f"{self.kind} needs a nonempty snr_grid_db")
        if self.kind == "port-sweep" and not self.port_grid:
            raise ValueError("port-sweep needs a nonempty port_grid")

    @property
    def fixed_count(self) -> int:
        if self.baselines.fixed_count is not None:
            return self.baselines.fixed_count
        return max(2, int(round(2 * self.geometry.Wt + 1)))

    def to_dict(self) -> dict[str, Any]:
        doc = dataclasses.asdict(self)
        doc["snr_grid_db"] = list(self.snr_grid_db)
        doc["port_grid"] = list(self.port_grid)
        doc["baselines"]["iid_counts"] = list(self.baselines.iid_counts)
        return doc

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ExperimentConfig":
        doc = dict(doc)
        if "geometry" in doc:
            doc["geometry"] = PortGeometry(**doc["geometry"])
        if "coupling" in doc:
            doc["coupling"] = CouplingSpec(**doc["coupling"])
        if "baselines" in doc:
            doc["baselines"] = Baselines(**doc["baselines"])
        unknown = set(doc) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)
