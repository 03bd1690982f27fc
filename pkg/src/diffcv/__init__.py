"""Differentiable computer vision built on a reverse-mode autodiff tensor engine."""

__version__ = "0.1.0"

