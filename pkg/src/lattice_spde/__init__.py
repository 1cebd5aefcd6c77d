"""Perturbation theory, simulation and noise identification for a lattice SPDE driven by Lévy noise."""
from .lattice import LatticeConfig, SpatialField, convolve, green, heat_kernel, mu_squared
from .levy import LevyParams, cumulant, sample_noise_increments
from .trees import RootedTree, attach, cut, enumerate_trees, multiplicity

__version__ = "0.1.0"
