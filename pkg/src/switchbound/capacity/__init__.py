"""Capacity measures: Rademacher complexities, combinatorial dimensions,
metric-entropy bounds and exact covers of finite classes."""

from .classes import (
    CapacityReport,
    ComponentClassSpec,
    FatPolyClass,
    KernelClass,
    LinearClass,
    fat_shattering_linear,
)
from .covering import (
    FiniteClass,
    distinct_classifications,
    entropy_decompose_pointwise,
    entropy_decompose_pws,
    entropy_decompose_switching,
    exact_entropy_fn,
    exact_min_cover,
    exact_min_cover_net,
    greedy_net,
    is_net,
    max_distance_to_net,
    pointwise_family,
    product_net_pws,
    pws_family,
    restricted_net_pws,
    switching_loss_family,
)
from .entropy import (
    entropy_inf_fat,
    entropy_inf_kernel,
    entropy_inf_linear_finite_d,
    entropy_l2_dimfree,
    entropy_pws,
    growth_linear_classifiers,
    growth_natarajan,
)
from .rademacher import (
    MCEstimate,
    class_sup,
    kernel_radius,
    make_rng,
    rademacher_enumerate,
    rademacher_exact,
    rademacher_linear_bound,
    rademacher_linear_exact,
    rademacher_mc,
    rademacher_mc_finite,
)

__all__ = [name for name in dir() if not name.startswith("_")]
