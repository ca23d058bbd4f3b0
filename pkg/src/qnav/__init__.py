"""qnav: hybrid quantum-classical actor-critic agent for a desk-scale
collision-free-navigation POMDP, with a noise-aware quantum simulator and
capacity analysis tools."""

__version__ = "0.1.0"
