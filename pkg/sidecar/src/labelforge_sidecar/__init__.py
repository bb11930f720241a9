"""HTTP scoring service wrapping a causal language model."""

from .app import ScoreRequest, SidecarConfig, create_app

__version__ = "0.1.0"
