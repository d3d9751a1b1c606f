"""Critical points of the LED energy-supply functional f = sum_i d_i^-m,
their continuation in the plane separation h, and the optical power model."""

from .critical import CriticalPoint, Kind, find_critical_points, newton_solve, uniqueness_bound
from .functional import Configuration, State, eval_f, eval_gradient, eval_hessian, lambertian_exponent

__version__ = "0.1.0"
