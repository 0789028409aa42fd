"""Pipeline configuration with a flat key=value file format.

Every knob of the discovery pipeline lives here; the CLI mirrors each field
as a flag. Unknown keys in a config file are rejected rather than ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .validation import ContractError


@dataclass
class Config:
    bins: int = 64
    overlap_frac: float = 0.2
    min_prominence_frac: float = 0.05
    n_discard: int = 1
    cc_threshold: float = 0.5
    combine_mode: str = "product"
    kernel: int = 3
    min_area_frac: float = 0.001
    nms_sigma: float = 0.5
    score_floor: float = 0.001
    lambda_consistency: float = 10.0
    tau_on_support: bool = False
    iou_thresh: float = 0.5

    def __post_init__(self):
        self.validate()

    def validate(self) -> "Config":
        if self.bins < 2:
            raise ContractError(f"bins {self.bins} must be >= 2")
        if not 0.0 <= self.overlap_frac < 0.5:
            raise ContractError(f"overlap_frac {self.overlap_frac} outside [0, 0.5)")
        if not 0.0 <= self.min_prominence_frac <= 1.0:
            raise ContractError(f"min_prominence_frac {self.min_prominence_frac} outside [0, 1]")
        if self.n_discard < 0:
            raise ContractError(f"n_discard {self.n_discard} must be >= 0")
        if not 0.0 < self.cc_threshold < 1.0:
            raise ContractError(f"cc_threshold {self.cc_threshold} outside (0, 1)")
        if self.combine_mode not in ("product", "sum"):
            raise ContractError(f"combine_mode {self.combine_mode!r} not product|sum")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ContractError(f"kernel {self.kernel} must be odd and >= 1")
        if not 0.0 <= self.min_area_frac <= 1.0:
            raise ContractError(f"min_area_frac {self.min_area_frac} outside [0, 1]")
        if self.nms_sigma <= 0:
            raise ContractError(f"nms_sigma {self.nms_sigma} must be > 0")
        if self.score_floor < 0:
            raise ContractError(f"score_floor {self.score_floor} must be >= 0")
        if self.lambda_consistency < 0:
            raise ContractError(f"lambda_consistency {self.lambda_consistency} must be >= 0")
        if not 0.0 < self.iou_thresh <= 1.0:
            raise ContractError(f"iou_thresh {self.iou_thresh} outside (0, 1]")
        return self

    def to_file(self, path) -> None:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name}={v}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path) -> "Config":
        values = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ContractError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
        return cls.from_mapping(values, source=str(path))

    @classmethod
    def from_mapping(cls, values: dict, source: str = "config") -> "Config":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ContractError(f"{source}: unknown config key {key!r}")
            kwargs[key] = _parse_value(cls, key, raw)
        return cls(**kwargs)


def _parse_value(cls, key: str, raw):
    default = cls.__dataclass_fields__[key].default
    if isinstance(raw, (int, float, bool)):
        return raw
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ContractError(f"config key {key}: bad boolean {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw
