"""Grid RPL network simulator with an IDS-placement evaluation harness."""

__version__ = "0.1.0"

from .config import SimConfig
from .topology import GridTopology, build_grid, default_grid

__all__ = ["SimConfig", "GridTopology", "build_grid", "default_grid", "__version__"]
