"""Open-system dynamics with cross-correlated (common-bath) decay channels."""

from .core import (
    DensityMatrix,
    HilbertSpace,
    KetState,
    Operator,
    basis_ket,
    commutator,
    anticommutator,
    expectation,
    make_atom_ops,
    make_cavity_ops,
    partial_trace,
    tensor_product,
)
from .eigenops import (
    EigenOperator,
    SpectralDecomposition,
    decompose,
    eigenoperators,
    verify_rwa_conservation,
)
from .master_equation import (
    DetailedBalanceReport,
    IntegrationError,
    MasterEquation,
    SpectralTensor,
    apply_t0_filter,
    build_dissipator,
    build_lamb_shift,
    diagonalize_gamma,
    integrate,
    jump_operators,
    validate_detailed_balance,
)
from .trajectories import (
    EffectiveGenerator,
    McwfResult,
    TrajectoryHierarchy,
    effective_generator,
    jump_feed,
    mcwf_unravel,
    propagate_deterministic,
    reconstruct,
    solve_hierarchy,
)
from .jc import (
    BlockSolution,
    JCParams,
    asymptotic_state,
    block_concurrence_exact,
    block_concurrence_variant,
    build_jc,
    closed_form_block,
    conditional_concurrence,
    conditional_concurrence_series,
    dark_state,
    excitation_number,
    excited_population,
    ground_state,
    jc_initial,
    jc_space,
    no_jump_postselect,
    one_excitation_block,
    solve_jc_hierarchy,
    two_qubit_projection,
    wootters_concurrence,
)

__version__ = "0.1.0"
