"""Moment-based learning of one-hidden-layer ReLU networks under Gaussian inputs."""

__version__ = "0.1.0"
