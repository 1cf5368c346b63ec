from .evolution import (
    IMAGINARY_TIME,
    REAL_TIME,
    EvolutionPlan,
    GroundStateResult,
    imaginary_time_ground_state,
    split_step,
    stationary_residual,
)
from .kernel import (
    CompositionDomainError,
    KernelQuadratureError,
    KernelRequest,
    KernelResolutionError,
    compose_kernel,
    composition_details,
    free_kernel,
    gaussian_kernel,
    kernel_equation_residual,
    kernel_residual_from_values,
    kernel_values,
    propagate_by_kernel,
)
