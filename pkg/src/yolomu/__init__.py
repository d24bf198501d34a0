"""From-scratch YOLOv5mu detection toolkit: network graph, losses, augmentation, decoding and metrics."""

__version__ = "0.1.0"
