"""Normal approximation bounds for linear statistics of exchangeable random tensors."""

__version__ = "0.1.0"
