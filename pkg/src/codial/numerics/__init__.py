"""Small deterministic reverse-mode autodiff on numpy arrays."""
from . import kernels
from .gradcheck import finite_diff_gradcheck
from .ops import (
    DegenerateBatchError,
    GaussianRepr,
    LabelError,
    RunningStats,
    add,
    batch_norm,
    clip,
    concat,
    conv2d,
    dense,
    div,
    exp,
    log,
    log_softmax,
    matmul,
    max_pool2d,
    mean,
    mul,
    neg,
    relu,
    reparam_sample,
    reshape,
    softmax_cross_entropy,
    softplus,
    sub,
    take,
)
from .ops import sum as sum_  # noqa: F401
from .optim import ConfigError, Optimizer, OptimizerConfig, optimizer_step
from .tensor import (
    DimensionError,
    Parameter,
    RankError,
    Tensor,
    backward,
    default_dtype,
    grad_enabled,
    no_grad,
    precision,
    set_default_dtype,
)

sum = sum_  # noqa: A001
