"""pegrl: planar tight-clearance peg-in-hole insertion learning stack."""

__version__ = "0.1.0"
