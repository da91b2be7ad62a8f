"""Radial solvers for closed-shell atoms: relativistic mean field with
spectral-projector diagnostics, projector-constrained and min-max
formulations, a density-matrix model, and the nonrelativistic companion
used for heavy-c limit studies."""

from .angular import angular_weight, threej_sum_rule, wigner_3j
from .channels import (
    ChannelOperator,
    diagonalize_channel,
    dirac_channel_matrix,
    free_channel_matrix,
    schrodinger_channel_matrix,
)
from .conditions import HypothesisReport, validate_conditions
from .configurations import ElectronicConfiguration, Shell, radial_density
from .fockspace import (
    DensityMatrix,
    fc_energy,
    maxmin_projector_iteration,
    minimize_fc_fixed_projector,
)
from .grids import RadialGrid, build_grid
from .hartreefock import NonrelShellSpec, default_nonrel_grid, hf_scf
from .limits import LimitTable, kinetic_balance_residual, limit_study
from .meanfield import EnergyBreakdown, df_energy, mean_field_matrix
from .minmax import MinMaxReport, maxmin_energy
from .oracles import oracle_sommerfeld, sto_hartree_fock
from .potentials import NuclearModel, nuclear_potential
from .projected import projected_scf
from .projectors import (
    Projector,
    epsilon_closeness,
    free_positive_projector,
    lambda_minus_residual,
    spectral_projector,
)
from .runconfig import RunConfig, parse_config, serialize_config
from .scf import SCFControls, SCFReport, ShellSpec, default_grid, scf_solve
from .slater import coulomb_kernel, slater_y

__version__ = "0.1.0"
