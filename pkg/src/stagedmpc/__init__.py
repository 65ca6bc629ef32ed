"""Staged tree model selection by agglomerative and mean posterior clustering."""
from .data import Dataset, DataError, Variable, ingest
from .export import CEG, SchemaError, export_dot, export_json, import_json, to_ceg
from .resize import ResizeMap, binary_resize, contract, transport_prior
from .scoring import PriorSpec, Staging, leaf_path_prior, model_score, saturated_score, stage_score
from .selection import SelectionResult, ahc, exact_map, mpc, replay, total_order
from .tree import EventTree, Hyperstage, build_event_tree, validate_hyperstage, variable_hyperstage

__all__ = [
    "CEG", "DataError", "Dataset", "EventTree", "Hyperstage", "PriorSpec", "ResizeMap",
    "SchemaError", "SelectionResult", "Staging", "Variable", "ahc", "binary_resize",
    "build_event_tree", "contract", "exact_map", "export_dot", "export_json", "import_json",
    "ingest", "leaf_path_prior", "model_score", "mpc", "replay", "saturated_score",
    "stage_score", "to_ceg", "total_order", "transport_prior", "validate_hyperstage",
    "variable_hyperstage",
]
