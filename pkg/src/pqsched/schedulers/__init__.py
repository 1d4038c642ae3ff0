"""Scheduling algorithms."""
from .hier import hier_sched
from .levelsched import Group, first_level, level_sched, level_threshold, run_levels
from .opsched import op_sched
from .pipesched import PlacementError, density_order, pipe_sched, place_clones
from .treesched import tree_groups, tree_sched, tree_sched_online
from .zsched import zsched

__all__ = [
    "Group", "PlacementError", "density_order", "first_level", "hier_sched",
    "level_sched", "level_threshold", "op_sched", "pipe_sched", "place_clones",
    "run_levels", "tree_groups", "tree_sched", "tree_sched_online", "zsched",
]
