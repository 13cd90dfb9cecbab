"""Monte Carlo laboratory for random walks in cooling random environments."""

__version__ = "0.1.0"
