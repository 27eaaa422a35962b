"""Deep joint image filtering: a three-branch CNN with a residual skip path."""

from ._backend import get_backend, get_num_threads, set_backend, set_num_threads

__version__ = "0.1.0"

__all__ = ["get_backend", "set_backend", "get_num_threads", "set_num_threads", "__version__"]
