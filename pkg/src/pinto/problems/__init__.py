from .analytic import advection_exact, beltrami_solution, cole_hopf_solution, kovasznay_eta, kovasznay_solution
from .base import (PROBLEMS, Advection, Beltrami, BoundarySequence, Burgers, CollocationSet, Kovasznay,
                   LidCavity, PdeProblem, boundary_sequence, get_problem, grid_points, sample_collocation,
                   uniform_axes)
from .burgers_fd import InstabilityError, burgers_fd_solve
from .cavity import ConvergenceError, lid_cavity_solve
from .conditions import Condition, ConditionFamily, condition_function, grf_ic, sinusoidal_ic
from .fields import ReferenceField
from .residuals import Bundle, MissingDirectionError, advection_residual, burgers_residual, ns_residual
