"""Physics-informed sound field estimation.

Basis-expansion ridge and l1 regression, Helmholtz kernel ridge regression,
neural field estimators, a shoebox image-source simulator and an NMSE
evaluation harness.
"""
from .acoustics import ObservationSet, RegionSpec, RoomSpec, Scene, shoebox_atf, t60_to_reflection, wavenumber
from .errors import (ConfigError, DomainError, IllPosedError, InfeasibleError, NumericalError, SingularityError,
                     TrainingDivergedError)

__version__ = "0.1.0"
