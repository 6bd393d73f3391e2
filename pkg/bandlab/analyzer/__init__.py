from .ensemble import LatticeSpec, CovarianceProfile, Scaling, Boundary, build_covariance, sample_block_band
from .spectra import SpectralEnsemble, ObservationPoint, Variant, collect_spectra, det_ratio_mc
from .berezin import GrassmannElement, NilpotentPolynomial, ScalarPoly, gaussian_grassmann, generating_function
from .scalars import bulk_constants, r_plus_minus_limit, r_plus_plus_limit, sine_kernel_limit
from .transfer import ZonalGrid, TransferOperator, assemble_transfer, evaluate_sigma_model
