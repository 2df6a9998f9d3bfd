"""Minimal dense-tensor autodiff engine."""
