"""Gaps, counts and tail counts of samples from residual allocation models."""

__version__ = "0.1.0"

from .hazard import HazardModel, mu_log, mu_moment  # noqa: E402
from .limitchain import LimitLaw  # noqa: E402
from .ram import Configuration  # noqa: E402

__all__ = ["HazardModel", "LimitLaw", "Configuration", "mu_log", "mu_moment", "__version__"]
