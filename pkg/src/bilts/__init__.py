"""Bi-invariant local trajectory-shape similarity for rigid-body motion."""

__version__ = "0.1.0"

from .errors import (BiltsError, ConfigError, DegenerateProgress, MismatchedScale, ParseError,
                     ProtocolError, PureTranslation, RotationNearPi, SchemaError,
                     SingularDecomposition, SingularInvariants, TooShort)
from .reparam import GeometricTrajectory, TemporalTrajectory, to_geometric
from .descriptor import (ShapeDescriptor, FunctionalFrame, eqr_decompose, descriptor_at,
                         descriptor_sequence, continuous_Y, analytic_R_from_isa, isa_from_R)
from .similarity import (MeasureParams, bilts_distance, bilts_plus_distance, sv_summary,
                         dtw_align, trajectory_distance, isa_distance)
