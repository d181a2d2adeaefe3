"""Toolkit for predicting the future spreading influence of nodes in
discrete-time temporal networks: weighted snapshots, per-node feature
matrices, a shared CNN + LSTM scorer, a weighted-SIR label oracle,
structural baselines and ranking evaluation."""

__version__ = "0.1.0"

from .sir import COMPILED_AVAILABLE, active_backend

__all__ = ["COMPILED_AVAILABLE", "active_backend", "__version__"]
