"""dipolarray: collective-excitation dynamics and decoherence on polar-molecule lattices.

Core pipeline: build a lattice geometry and its r^-3 coupling kernel, assemble
the spin Hamiltonian per excitation sector, evolve the symmetric collective
states to extract the nonlinear phase and gate time, and quantify decoherence
from non-symmetric couplings (spin-wave channel) and crystal phonons.
"""

__version__ = "0.1.0"

from .basis import ResourceLimitError, dicke_state, overlap, sector_basis
from .dynamics import (
    GateNotReached,
    compute_trajectory,
    dicke_projections,
    evolve,
    gate_time,
)
from .hamiltonian import (
    EffectiveGateParams,
    chi_eff,
    exchange_hamiltonian,
    full_hamiltonian,
    gate_params,
    theta_analytic,
)
from .lattice import Lattice, build_lattice, coupling_kernel, momentum_grid
from .phonon import (
    PhononModel,
    build_phonon_model,
    coupling_weight_g,
    dynamical_matrix,
    gamma1_fgr,
    gamma1_time,
    gamma2,
    phonon_spectrum,
)
from .spinwave import (
    dispersion,
    dispersion_asymptote_check,
    dispersion_curve,
    fgr_scaling_diagnostic,
    fourier_kernel,
    perturbative_decay2,
    spin_wave_energies,
)
from .stark import MOLECULES, SRO, MolecularParams, beta_parameter, dressed_pair, rotor_eigensystem, xi_kappa_sweep

__all__ = [
    "__version__",
    "Lattice",
    "build_lattice",
    "coupling_kernel",
    "momentum_grid",
    "sector_basis",
    "dicke_state",
    "overlap",
    "ResourceLimitError",
    "exchange_hamiltonian",
    "full_hamiltonian",
    "chi_eff",
    "gate_params",
    "theta_analytic",
    "EffectiveGateParams",
    "evolve",
    "dicke_projections",
    "compute_trajectory",
    "gate_time",
    "GateNotReached",
    "dispersion",
    "dispersion_curve",
    "dispersion_asymptote_check",
    "fourier_kernel",
    "spin_wave_energies",
    "perturbative_decay2",
    "fgr_scaling_diagnostic",
    "MolecularParams",
    "SRO",
    "MOLECULES",
    "rotor_eigensystem",
    "dressed_pair",
    "xi_kappa_sweep",
    "beta_parameter",
    "PhononModel",
    "build_phonon_model",
    "dynamical_matrix",
    "phonon_spectrum",
    "coupling_weight_g",
    "gamma1_time",
    "gamma1_fgr",
    "gamma2",
]
