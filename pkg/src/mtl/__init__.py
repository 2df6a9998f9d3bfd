"""Multi-task losses, models and checkpoints."""
