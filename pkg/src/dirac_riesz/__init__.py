"""Spectra, resolvents and Riesz projectors of Dirac operators

    T_Q = J d/dx + Q,   J = diag(-i I, i I),   Q = [[0, q1], [q2, 0]],

on (0, 1) with y1(0) = y2(0), y1(1) = y2(1), computed by shooting.
"""

from .characteristic import (
    SingularCharacteristicMatrix,
    c_matrix,
    char_det,
    char_det_derivative,
    characteristic,
    m_matrix,
    s_matrix,
    verify_paley_wiener,
)
from .diagnostics import (
    BandLimitedFunction,
    bari_markus_table,
    contour_bounds_check,
    contour_bounds_scan,
    lemma_A_sum,
)
from .gridfunc import GridFunction
from .potentials import (
    MatrixPotential,
    PotentialSpecError,
    adjoint_potential,
    constant_potential,
    l2_norm,
    load_potential,
    nonnormal_potential,
    random_smooth_potential,
    trig_potential,
    zero_potential,
)
from .projectors import (
    ContourTooCloseToEigenvalue,
    ProjectorKernel,
    free_projector_kernel,
    hs_norm,
    kernel_rank,
    op_norm,
    projector_for_eigenvalue,
    projector_kernel,
)
from .propagator import fundamental_matrix, phi_samples, psi_samples, wronskian_residual
from .resolvent import entire_part_apply, resolvent_apply, resolvent_residual
from .spectrum import (
    ContourSpec,
    EigenvalueRecord,
    Spectrum,
    asymptotics_report,
    compute_spectrum,
    count_zeros,
    eigenvalues_in_strip,
    index_spectrum,
)

__version__ = "0.1.0"
