"""Private last-layer fine-tuning under Neural Collapse: geometry, trainers,
error bounds and a Monte Carlo harness that checks them."""

__version__ = "0.1.0"
