"""Minimal differentiable operators for 1-D signal networks (float64, numpy)."""
