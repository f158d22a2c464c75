"""Multi-domain anomaly masks and a mask-guided lightweight classifier for manipulated-face detection."""

__version__ = "0.1.0"
