"""Multi-resource scheduling of parallel query plans on shared-nothing sites."""
from .bounds import (BoundsReport, lb_independent, lb_pipelines, perf_ratio,
                     tree_bound)
from .config import SystemConfig
from .cost_model import HardwareParams, InfeasibleError, OpKind, RelationStats
from .plan import (PlanNode, Pipeline, TaskTree, critical_path_time, expand_plan,
                   gen_workload)
from .schedule import Schedule
from .schedulers import (hier_sched, level_sched, op_sched, pipe_sched,
                         tree_sched, tree_sched_online, zsched)
from .simexec import execute, validate
from .vectors import Clone, make_clone, seq_time, subset_exec_time, vector_length

__version__ = "0.1.0"
