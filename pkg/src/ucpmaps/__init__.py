"""Spectral and structural analysis of unital completely positive maps on M_d."""

from .boundary import boundary_algebra, ce_product, ce_product_iterative, verify_cstar_axioms
from .channel import (
    Channel,
    adjoint,
    compose,
    convex_combine,
    fixtures,
    from_choi,
    from_kraus,
    pinch_compress,
    random_channel,
    validate,
)
from .classify import (
    automorphism_check,
    irreducible_blocks,
    is_peripherally_automorphic,
    is_stationary,
    kraus_algebra,
    multiplicative_domain,
    multiplicative_domain_inf,
)
from .errors import UCPError
from .numkernel import DEFAULT_TOL, ToleranceConfig
from .spectral import peripheral_decomposition, peripheral_projector, spectrum

__version__ = "0.1.0"
