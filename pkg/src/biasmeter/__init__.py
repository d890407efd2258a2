"""biasmeter: meta-evaluation of intrinsic gender-bias measures for MLMs."""

__version__ = "0.1.0"
