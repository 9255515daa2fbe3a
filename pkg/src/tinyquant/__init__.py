"""Two-bitwidth post-training quantization with optimal scratch-buffer planning."""

__version__ = "0.1.0"
