from .spectral import AbstractSpectralCheck, SpectralCheck, check_spectra
from .algebra import AbstractAlgebraCheck, AlgebraCheck, check_algebra
from .limits import AbstractLimitCheck, LimitCheck, check_limit
