"""Most probable transition paths of gradient diffusions dX = grad U dt + sigma dW."""

__version__ = "0.1.0"

from .model import (Path, Potential, ProblemSpec, ConfigError, RegistryError,  # noqa: E402
                    build_problem, serialize, make_potential, grad_potential,
                    laplacian_potential, grad_sq_gradient)
from .lineardyn import (LinearModel, GaussianMoments, state_transition, moments,  # noqa: E402
                        gaussian_density, bridge_moments, bridge_density,
                        linear_bridge_drift, ou_bridge_drift, ou_analytic_path)
from .action import (ActionReport, om_action, fw_action, fw_action_paper_discrete,  # noqa: E402
                     el_residual, action_report)
from .solvers import (DriftField, ShootingResult, NonconvergenceError,  # noqa: E402
                      integrate_ivp, shoot_el, gauss_legendre)
from .approx import (ApproxSpec, free_bridge_drift, appr1_drift, appr2_drift,  # noqa: E402
                     approx_path)
from .mcverify import (Ensemble, TubeEstimate, sample_sde, sample_bridge,  # noqa: E402
                       sample_ou_bridge, tube_probability, om_ratio_check)
from .routes import solve_problem, table1  # noqa: E402
