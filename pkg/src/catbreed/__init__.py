"""Simulation of homodyne-heralded breeding of squeezed cat states from single photons.

The package is layered bottom-up:

* :mod:`catbreed.fock` – truncated Fock-space states, beamsplitter, quadrature
  projection, loss, fidelity, squeezed cats and the exact breeding route;
* :mod:`catbreed.wigner` – the imperfect-photon Wigner model, the closed-form
  joint homodyne density and Gaussian-kernel breeding in phase space;
* :mod:`catbreed.sampler` – synthetic joint homodyne data, conditioning and fits;
* :mod:`catbreed.tomography` – efficiency-aware maximum-likelihood tomography;
* :mod:`catbreed.pipeline` / :mod:`catbreed.cli` – reproducible experiments.
"""

from .errors import (
    AccuracyError,
    CatBreedError,
    DegenerateWindowError,
    DegreeOverflowError,
    DomainError,
    EnvelopeError,
    OutputError,
    TruncationError,
    ValidationError,
)
from .fock import (
    REFERENCE_CAT,
    DensityMatrix,
    FockVector,
    SqueezedCatSpec,
    TwoModeState,
    apply_loss,
    beamsplitter_2mode,
    best_fit_cat,
    breed_fock,
    breed_fock_pure,
    fidelity,
    hermite_wavefunction,
    homodyne_project,
    make_squeezed_cat,
    wigner_of_state,
)
from .phasespace import GridAxis, WignerGrid
from .sampler import (
    SampleRecord,
    SampleSet,
    analytic_acceptance,
    condition,
    estimate_delta_quick,
    fit_sigma_delta,
    histogram2d,
    sample_joint,
    sample_phases,
    sample_photon_vacuum,
    sample_until_conditioned,
)
from .tomography import (
    POVMSet,
    TomographyConfig,
    TomographyResult,
    build_homodyne_povm,
    mc_error_bars,
    mle_reconstruct,
    negativity_and_fidelity_report,
)
from .units import CONVENTION, QuadratureConvention
from .wigner import (
    IDEAL_PHOTON,
    MEASURED_PHOTON,
    GaussPolyWigner,
    PhotonSourceParams,
    SinglePhotonModel,
    breed_wigner,
    imperfect_photon_params,
    imperfect_photon_wigner,
    joint_prob_closed,
    joint_prob_numeric,
    loss_channel_wigner,
    negativity,
)

__version__ = "0.1.0"
