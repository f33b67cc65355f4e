"""Python bindings for the gnmr remaining-useful-life library."""

import json

from ._gnmr import (
    CompatibilityError,
    ConfigError,
    ContractError,
    DimensionError,
    LoadError,
    Model,
    NumericalError,
    ValidationError,
    channel_names,
    denormalize_prediction,
    rmse,
    timeliness_score,
)
from . import _gnmr


def load_graph(path):
    return json.loads(_gnmr.load_graph_json(str(path)))


def validate_graph(graph):
    _gnmr.validate_graph_json(json.dumps(graph))


def graph_hash(graph):
    return _gnmr.graph_hash(json.dumps(graph))


def graph_variant(graph, variant, seed=0):
    return json.loads(_gnmr.graph_variant_json(json.dumps(graph), variant, seed))


def initialized_model(graph, hidden=30, gru_layers=2, steps=2, seed=0):
    """Freshly initialized GNMR model for the given graph dict."""
    return Model.initialized(json.dumps(graph), hidden, gru_layers, steps, seed)


def adjacency(graph):
    """Row-normalized (a_in, a_out) matrices."""
    return _gnmr.adjacency(json.dumps(graph))


__all__ = [
    "CompatibilityError",
    "ConfigError",
    "ContractError",
    "DimensionError",
    "LoadError",
    "Model",
    "NumericalError",
    "ValidationError",
    "adjacency",
    "channel_names",
    "denormalize_prediction",
    "graph_hash",
    "graph_variant",
    "initialized_model",
    "load_graph",
    "rmse",
    "timeliness_score",
    "validate_graph",
]
