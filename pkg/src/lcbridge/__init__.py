"""Light-client bridge toolkit: proof system, distributed prover and bridge simulation."""

__version__ = "0.1.0"
