"""Monte Carlo integration as least-squares function approximation.

The estimator family here replaces the sample mean with the integral of a
least-squares surrogate fitted to the same samples: with an orthonormal
polynomial basis the fitted constant coefficient *is* the estimate, the
residual variance drives the reported interval, and the machinery extends
to importance-weighted sampling, budget-adaptive degrees, sparse-grid
control variates, stratification, and antithetic pairing.
"""

from .core import (
    CI_MULTIPLIER,
    EstimateReport,
    HyperRect,
    Integrand,
    RngSpec,
    SampleBatch,
    make_report,
)
from .basis import (
    IndexSet,
    basis_integrals,
    eval_basis_matrix,
    eval_legendre_1d,
    legendre_table,
    multi_index_set,
    total_degree_size,
)
from .linalg import (
    CGResult,
    QRState,
    cg_normal,
    cond2,
    ls_solve,
    qr_col_append,
    qr_factor,
    qr_row_update,
)
from .sampling import (
    ChristoffelSampler,
    StratumPartition,
    antithetic_batch,
    christoffel_batch,
    christoffel_weights,
    halton_batch,
    halton_points,
    stratified_batch,
    uniform_batch,
)
from .sparsegrid import (
    SparseGridInterpolant,
    level_node_count,
    sg_build,
    sg_eval,
    sg_integral,
)
from .estimators import (
    CoefficientVector,
    bias_bound,
    chernoff_epsilon,
    control_variate_estimate,
    mc_estimate,
    mcls_estimate,
    two_stage_unbiased,
    wls_mcls_estimate,
)
from .adaptive import (
    BudgetSplit,
    DegreeSchedule,
    antithetic_mcls,
    degree_for_budget,
    even_index_subset,
    level_for_budget,
    mclsa_run,
    sg_mclsa_run,
    split_for_level,
    stratified_mcls,
)
from .bench import (
    MethodSpec,
    SweepResult,
    SweepRow,
    TestProblem,
    basket_payoff,
    convergence_sweep,
    fit_loglog_slope,
    norm_inv_cdf,
    read_csv,
    register_standard_problems,
    render_plot,
    write_csv,
    write_gnuplot,
)

__version__ = "0.1.0"
