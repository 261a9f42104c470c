"""Inner-loop fixed-point algorithms for inverting demand share systems.

Static and dynamic random-coefficients logit inversion with outside-share-
corrected mappings, plus Anderson/spectral/SQUAREM acceleration and a
seeded benchmark harness.
"""

from .accel import (AccelConfig, FixedPointMap, SolveOutcome, anderson_combine,
                    anderson_weights, solve, spectral_alpha, spectral_update,
                    squarem_update)
from .dynamic import (DurableMarket, DurableSolution, IvsGrid, IvsState,
                      bellman_residual, dynamic_dist, ivs_solve,
                      pf_forward_pass, pf_solve, pf_value_update,
                      traditional_joint_solve, traditional_nested_solve)
from .numerics import (Ar1Fit, Quadrature, chebyshev_eval, chebyshev_fit,
                       chebyshev_nodes, gauss_hermite, ls_minnorm, ols_ar1)
from .rcnl import (NestedMarket, rcnl_dist_metric, rcnl_iota_delta_to_IV,
                   rcnl_iota_IV_to_delta, rcnl_phi_delta, rcnl_phi_IV,
                   rcnl_shares, rcnl_solve_inner)
from .static_rcl import (StaticMarket, dist_metric, iota_delta_to_V,
                         iota_V_to_delta, kalouptsidi_F, kalouptsidi_Ftilde,
                         kalouptsidi_mixed_solve, phi_V, phi_delta,
                         predict_shares, solve_inner)

__version__ = "0.1.0"
