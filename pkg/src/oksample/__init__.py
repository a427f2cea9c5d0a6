"""One-vs-K-sample tests for a single case against heterogeneous controls."""

__version__ = "0.1.0"
