"""Non-Hermitian Wannier-Stark ladders: Floquet phase diagram and tilted-chain dynamics."""

__version__ = "0.1.0"
