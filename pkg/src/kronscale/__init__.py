"""kronscale: Kronecker-scaling circuits for tripartitioning tensors."""

__version__ = "0.1.0"
