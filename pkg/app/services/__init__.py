"""
Service layer modules for the tie inference toolkit.
"""
from .interaction_store import EventStore, Labels, ingest, load_labels
from .feature_service import FEATURE_NAMES, compute_features
from .synth_world import generate

__all__ = [
    "EventStore",
    "Labels",
    "ingest",
    "load_labels",
    "FEATURE_NAMES",
    "compute_features",
    "generate",
]
