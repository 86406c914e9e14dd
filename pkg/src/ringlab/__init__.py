"""ringlab: a desk-scale lab for DRL ring-road congestion control and its
physics-constrained backdoor attacks."""

__version__ = "0.1.0"
