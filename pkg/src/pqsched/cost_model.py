"""Per-operator work and demand estimates from catalog statistics.

Work vectors are ordered ``[CPU, disk, net]`` and exclude communication; the
network component is filled in later when an operator is split into clones.
CPU recipes (instruction counts per page / tuple):

=======  ================================================================
Scan     pages * read_page + tuples * extract_tuple
Select   Scan + selected * hash_tuple (output is hashed for repartitioning)
Build    tuples * (extract_tuple + hash_tuple)
Probe    outer * (hash_tuple + probe_hash) + result * extract_tuple
Store    pages * write_page + tuples * extract_tuple
=======  ================================================================

Scan, Select and Store also pay ``disk_ms_per_page`` per page. Build reserves
``fudge * inner_pages`` of memory; every streaming operator reserves two pages
(double buffering).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

CPU, DISK, NET = 0, 1, 2
WORK_DIMS = 3
DEMAND_DIMS = 1

DEFAULT_INSTR = {
    "read_page": 5000,
    "write_page": 5000,
    "extract_tuple": 300,
    "hash_tuple": 100,
    "probe_hash": 200,
}


class InfeasibleError(ValueError):
    """An operator or pipeline cannot be placed within the system's memory."""

    def __init__(self, message: str, operator_id: str | None = None):
        super().__init__(message if operator_id is None else f"{operator_id}: {message}")
        self.operator_id = operator_id


class OpKind(str, Enum):
    SCAN = "Scan"
    SELECT = "Select"
    BUILD = "Build"
    PROBE = "Probe"
    STORE = "Store"
    MERGED = "Merged"


@dataclass(frozen=True)
class HardwareParams:
    mips: float = 10.0
    disk_ms_per_page: float = 5.0
    page_tuples: int = 32
    tuple_bytes: int = 128
    mem_pages_per_site: int = 4096
    startup_alpha_ms: float = 25.0
    net_beta_ms_per_byte: float = 0.0002
    fudge_F: float = 1.4
    cpu_instr: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_INSTR))

    def __post_init__(self) -> None:
        for name in ("mips", "disk_ms_per_page", "page_tuples", "tuple_bytes",
                     "mem_pages_per_site", "startup_alpha_ms",
                     "net_beta_ms_per_byte", "fudge_F"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        missing = set(DEFAULT_INSTR) - set(self.cpu_instr)
        if missing:
            raise ValueError(f"cpu_instr missing {sorted(missing)}")
        if any(v <= 0 for v in self.cpu_instr.values()):
            raise ValueError("instruction counts must be > 0")

    @property
    def page_bytes(self) -> int:
        return self.page_tuples * self.tuple_bytes

    def pages(self, tuples: int) -> int:
        return math.ceil(tuples / self.page_tuples)

    def cpu_ms(self, instructions: float) -> float:
        return instructions / (self.mips * 1000.0)

    @classmethod
    def with_memory_mb(cls, memory_mb: float, **kw) -> HardwareParams:
        page_tuples = kw.get("page_tuples", 32)
        tuple_bytes = kw.get("tuple_bytes", 128)
        pages = int(memory_mb * 2**20) // (page_tuples * tuple_bytes)
        return cls(mem_pages_per_site=pages, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RelationStats:
    name: str
    tuples: int

    def __post_init__(self) -> None:
        if self.tuples < 0:
            raise ValueError(f"relation {self.name}: negative tuple count")

    def pages(self, hw: HardwareParams) -> int:
        return hw.pages(self.tuples)


@dataclass(frozen=True)
class OperatorCost:
    kind: OpKind
    base_work: tuple[float, float, float]
    total_demand: tuple[float, ...]
    bytes_transferred: float
    output_stats: RelationStats


def key_join_output(left: RelationStats, right: RelationStats,
                    name: str | None = None) -> RelationStats:
    """Key join: the result is as large as the larger operand."""
    return RelationStats(name or f"({left.name}*{right.name})",
                         max(left.tuples, right.tuples))


def _buffer_demand(hw: HardwareParams) -> tuple[float]:
    return (2.0 / hw.mem_pages_per_site,)


def estimate_operator(kind: OpKind | str, input_stats: RelationStats,
                      hw: HardwareParams, selectivity: float = 1.0,
                      second: RelationStats | None = None,
                      p_sites: int | None = None) -> OperatorCost:
    """Cost one physical operator.

    ``second`` is the inner (build) relation for Probe. With ``p_sites`` the
    estimate fails if the operator's memory cannot fit on the whole system.
    """
    kind = OpKind(kind)
    ins = hw.cpu_instr
    tuples = input_stats.tuples
    pages = input_stats.pages(hw)
    disk = 0.0
    demand = _buffer_demand(hw)
    out = input_stats

    if kind in (OpKind.SCAN, OpKind.SELECT):
        instr = pages * ins["read_page"] + tuples * ins["extract_tuple"]
        disk = pages * hw.disk_ms_per_page
        if kind is OpKind.SELECT:
            if not 0.0 <= selectivity <= 1.0:
                raise ValueError(f"selectivity must lie in [0, 1], got {selectivity}")
            selected = round(selectivity * tuples)
            instr += selected * ins["hash_tuple"]
            out = RelationStats(f"sel({input_stats.name})", selected)
    elif kind is OpKind.BUILD:
        instr = tuples * (ins["extract_tuple"] + ins["hash_tuple"])
        demand = (hw.fudge_F * pages / hw.mem_pages_per_site,)
    elif kind is OpKind.PROBE:
        if second is None:
            raise ValueError("Probe needs the inner relation")
        out = key_join_output(second, input_stats)
        instr = (tuples * (ins["hash_tuple"] + ins["probe_hash"])
                 + out.tuples * ins["extract_tuple"])
    elif kind is OpKind.STORE:
        instr = pages * ins["write_page"] + tuples * ins["extract_tuple"]
        disk = pages * hw.disk_ms_per_page
    else:
        raise ValueError(f"cannot estimate {kind.value} directly")

    # Build and Store outputs stay local; producers pay for shipping.
    shipped = 0 if kind in (OpKind.BUILD, OpKind.STORE) else out.tuples * hw.tuple_bytes
    if p_sites is not None and max(demand) > p_sites:
        raise InfeasibleError(
            f"{kind.value} needs {max(demand):.3f} sites of memory, system has {p_sites}")
    return OperatorCost(kind, (hw.cpu_ms(instr), disk, 0.0), demand,
                        float(shipped), out)


def merged_cost(parent: OperatorCost, child: OperatorCost) -> OperatorCost:
    """Two execution phases that share one memory reservation."""
    work = tuple(a + b for a, b in zip(parent.base_work, child.base_work))
    demand = tuple(max(a, b) for a, b in zip(parent.total_demand, child.total_demand))
    return OperatorCost(OpKind.MERGED, work, demand,
                        parent.bytes_transferred + child.bytes_transferred,
                        parent.output_stats)
