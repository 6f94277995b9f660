"""acsflow: numerics for the alpha-curve shortening flow of convex curves.

Convex curves are represented by support functions on a periodic grid.
Submodules: geometry (curve representation), shrinker (self-similar
profiles), entropy (scale-invariant entropy functional), flow (time
integration), spectral (linearization at shrinkers), modes (neutral-mode
dynamics diagnostics), cli (command-line experiments).
"""

__version__ = "0.1.0"

from . import errors
from .geometry import AngularGrid, SupportFunction

__all__ = ["AngularGrid", "SupportFunction", "errors", "__version__"]
