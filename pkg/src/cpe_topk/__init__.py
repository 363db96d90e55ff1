"""Top-k combinatorial pure exploration with full-bandit feedback."""

from .environments import CrowdEnvironment, Environment, SyntheticSpec, generate_synthetic
from .instance import Allocation, BanditInstance, SuperArm, default_support, uniform_allocation

__version__ = "0.1.0"

__all__ = [
    "Allocation", "BanditInstance", "CrowdEnvironment", "Environment", "SuperArm", "SyntheticSpec",
    "default_support", "generate_synthetic", "uniform_allocation",
]
