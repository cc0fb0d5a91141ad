"""Ground-truth-free estimation of malware detection metrics from detector label matrices."""

__version__ = "0.1.0"
