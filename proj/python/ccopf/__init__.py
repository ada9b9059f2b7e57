"""Chance-constrained dispatch policy learning for AC grids."""

from ._ccopf import (  # noqa: F401
    AdmittanceMatrix,
    BusType,
    CaseParseError,
    CaseValidationError,
    ConstraintVector,
    Dispatch,
    LoadVector,
    Metrics,
    NetworkCase,
    OpfSolution,
    PolicyMode,
    PolicyParams,
    PowerFlowDivergenceError,
    TrainConfig,
    TrainResult,
    VariableIndex,
    VoltageState,
    build_admittance,
    constraint_values,
    evaluate,
    flow_sensitivity,
    forward,
    init_policy,
    load_case,
    load_policy,
    logistic,
    logistic_grad,
    make_split,
    nominal_loads,
    parse_case,
    partition_variables,
    policy_jacobian,
    sample_loads,
    save_policy,
    solve_opf,
    solve_pf,
    train,
)

__version__ = "0.1.0"
