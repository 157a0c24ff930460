"""Majority dynamics with Poisson clocks on Z^2 and percolation of its open sites."""

__version__ = "0.1.0"

from .grid import BoundaryPolicy, Rect, Site, SpinConfig  # noqa: E402
from .clocks import ClockStream, ExplicitClocks, SeedSpec  # noqa: E402
from .dynamics import InitialField, evaluate_lazy, evolve_forward, evolve_trajectory  # noqa: E402

__all__ = ["BoundaryPolicy", "Rect", "Site", "SpinConfig", "ClockStream", "ExplicitClocks", "SeedSpec",
           "InitialField", "evaluate_lazy", "evolve_forward", "evolve_trajectory", "__version__"]
