"""Attention-head function approximation on hyperspheres.

The package builds exponential-kernel attention heads whose prefix tokens
encode control points on S^m, synthesizes prefixes that approximate target
functions, evaluates the explicit accuracy/length bounds that govern the
construction, and assembles the sequence-to-sequence pipeline that encodes
a whole input sequence into one scalar before decoding per-position outputs.
"""

__version__ = "0.1.0"
