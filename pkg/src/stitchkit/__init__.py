"""Semi-global invariants of stitched Lagrangian torus fibrations."""

__version__ = "0.1.0"
