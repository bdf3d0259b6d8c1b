"""Simulation, fitting and time-reversal testing of Hawkes processes."""
__version__ = "0.1.0"

from .events import EventSeries, read_events_csv, reverse, write_events_csv  # noqa: E402
from .model import ExpKernel, HawkesModel, PowerLawKernel, SumExpKernel  # noqa: E402
from .simulate import simulate, simulate_stationary  # noqa: E402
from .likelihood import compensators, loglik  # noqa: E402
from .estimate import mle, mle_multivariate, nonparametric_kernel  # noqa: E402
from .gof import gof_report  # noqa: E402

__all__ = ["EventSeries", "read_events_csv", "write_events_csv", "reverse", "HawkesModel", "ExpKernel",
           "SumExpKernel", "PowerLawKernel", "simulate", "simulate_stationary", "loglik", "compensators",
           "mle", "mle_multivariate", "nonparametric_kernel", "gof_report", "__version__"]
