"""System configuration and its JSON form."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .cost_model import DEFAULT_INSTR, DEMAND_DIMS, WORK_DIMS, HardwareParams


@dataclass(frozen=True)
class SystemConfig:
    p_sites: int = 10
    d: int = WORK_DIMS
    s: int = DEMAND_DIMS
    epsilon: float = 0.5
    f: float = 0.6
    lam: float = 0.2
    hw: HardwareParams = field(default_factory=HardwareParams)

    def __post_init__(self) -> None:
        if self.p_sites < 1:
            raise ValueError("p_sites must be >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.f <= 0:
            raise ValueError("f must be > 0")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")

    @property
    def alpha(self) -> float:
        return self.hw.startup_alpha_ms

    @property
    def beta(self) -> float:
        return self.hw.net_beta_ms_per_byte

    def with_(self, **kw) -> SystemConfig:
        hw_kw = {k: kw.pop(k) for k in list(kw) if k in _HW_FIELDS}
        if "memory_mb" in kw:
            mb = kw.pop("memory_mb")
            hw_kw["mem_pages_per_site"] = int(mb * 2**20) // self.hw.page_bytes
        hw = replace(self.hw, **hw_kw) if hw_kw else self.hw
        return replace(self, hw=hw, **kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SystemConfig:
        data = dict(data)
        unknown = set(data) - {f.name for f in fields(cls)} - {"lambda", "memory_mb"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        hw_data = dict(data.pop("hw", {}) or {})
        bad = set(hw_data) - _HW_FIELDS
        if bad:
            raise ValueError(f"unknown hardware keys: {sorted(bad)}")
        if "cpu_instr" in hw_data:
            hw_data["cpu_instr"] = {**DEFAULT_INSTR, **hw_data["cpu_instr"]}
        if "memory_mb" in data:
            page = hw_data.get("page_tuples", 32) * hw_data.get("tuple_bytes", 128)
            hw_data["mem_pages_per_site"] = int(data.pop("memory_mb") * 2**20) // page
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(hw=HardwareParams(**hw_data), **data)

    @classmethod
    def load(cls, path: str | Path) -> SystemConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


_HW_FIELDS = {f.name for f in fields(HardwareParams)}
