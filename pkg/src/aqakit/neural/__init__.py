from .tensor import Tensor, no_grad, set_debug_nan_checks  # noqa: F401
