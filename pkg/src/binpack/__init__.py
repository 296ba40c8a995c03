"""Semi-online 2D grid bin packing with look-ahead search, repacking and
dual-robot scheduling."""

__version__ = "0.1.0"

from .grid import (ContractViolation, GridBin, ItemSpec, NotPackedError, Orientation, Placement,
                   PlacementConflict, apply_pack, apply_unpack, decode_action, edge_contact_reward,
                   encode_action, feasibility_mask, is_full, utilization)
from .policy import GreedyPolicy, greedy_place
from .env import SCENARIOS, Pack, Robot, ScenarioConfig, TERMINATE, Unpack, WorldState, scenario
from .search import SearchConfig, high_level_search
from .alloc import allocate, count_steps, sequence_atomic
from .datagen import InstanceRecord, generate_full_set, generate_random_instance

__all__ = [
    "ContractViolation", "GridBin", "ItemSpec", "NotPackedError", "Orientation", "Placement",
    "PlacementConflict", "apply_pack", "apply_unpack", "decode_action", "edge_contact_reward",
    "encode_action", "feasibility_mask", "is_full", "utilization", "GreedyPolicy", "greedy_place",
    "SCENARIOS", "Pack", "Robot", "ScenarioConfig", "TERMINATE", "Unpack", "WorldState", "scenario",
    "SearchConfig", "high_level_search", "allocate", "count_steps", "sequence_atomic",
    "InstanceRecord", "generate_full_set", "generate_random_instance",
]
