"""Data-to-state estimation for parametric elliptic PDEs with sensor coordinates and ResNets."""

__version__ = "0.1.0"
