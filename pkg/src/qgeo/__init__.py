"""Quantum geometry of parameter-dependent eigenstates: geometric tensor,
quantum Christoffel symbols, parallel transport, holonomy, and gauge-
invariant adiabatic perturbation theory with an exact-propagation oracle."""

from .apt import (AdiabaticExpansion, APTOrderData, APTSolution, DrivenSystem,
                  ResponseTensors, assemble_state, corrections, covariant_time_derivative,
                  energy_expectation, local_expansion, phase_coefficients, recurrence,
                  recurrence_step, resolvent_apply, resolvent_rate, response, solve,
                  tangent_ket)
from .errors import (ConfigError, DegenerateLevel, DomainError, FitRejected, FrameMismatch,
                     IntegratorWarning, NonHermitian, NotOrthogonal, NumericalAbort,
                     QGeoError, SingularQGT, StencilFailure, StepFailure, StepUnderflow)
from .geometry import (QGT, Christoffel, CurvatureTensor, TangentFrame, christoffel,
                       compatibility_check, covariant_frame, curvature,
                       imag_christoffel_identity, qgt, qgt_at, second_covariant)
from .models import (CanonicalState, EigenFrame, HamiltonianFamily, constant_family,
                     eigensystem, gauge_fix, grad_H, matrix_polynomial, reparametrize,
                     spin_field_family, three_state, three_state_config_family,
                     three_state_family, three_state_two_level_slice, two_level_family)
from .oracle import OrderFit, PropagationResult, order_check, propagate
from .paths import ParamPath
from .transport import (GeometricPhase, Holonomy, TangentKetComponents, TransportResult,
                        geometric_phase, holonomy, parallel_transport_states)

__version__ = "0.1.0"
