"""Optimizers, training loop and run sets."""
