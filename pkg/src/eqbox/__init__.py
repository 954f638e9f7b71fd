"""Box and observable distances between finite metric measure spaces with
group actions: couplings, quotients, thick parts, automorphism groups, and
a desk-scale verification suite for every inequality the distances obey."""

from .boxdist import (
    BoundResult,
    DiscrepancyCertificate,
    SearchBudget,
    SideMap,
    box_oracle,
    box_upper,
    box_upper_plain,
    box_via_coupling,
    coupling_discrepancy,
    mwis,
    northwest_corner,
    subset_discrepancy,
)
from .coupling import (
    Coupling,
    Relation,
    compose_couplings,
    diagonal_coupling,
    glue,
    glue_project,
    product_coupling,
    product_metric,
    prokhorov,
    relation_compose,
    relation_dom,
    relation_im,
    relation_inverse,
    support,
    validate_coupling,
)
from .errors import BudgetError, EqboxError, ValidationError
from .group import (
    MMAction,
    enumerate_aut,
    extract_limit_group,
    quotient,
    select_thickness_threshold,
    thick_part,
    trivial_action,
    validate_action,
)
from .harness import (
    ExperimentReport,
    LensConfig,
    ReportRow,
    emit_report,
    gen_cycle,
    gen_gaussian_instance,
    gen_lens_instance,
    run_lens_experiment,
    run_properness_probe,
    run_quotient_convergence,
)
from .mmspace import (
    FiniteMMSpace,
    LipFunction,
    ky_fan,
    ky_fan_map,
    lip_check,
    obs_diam_lower,
    obs_diam_oracle,
    partial_diameter,
    pushforward,
    validate_space,
)
from .obsdist import (
    dconc_oracle,
    dconc_upper,
    dconc_upper_plain,
    dconc_via_coupling,
    mcshane_extend,
    rho_hausdorff_oracle,
    rho_hausdorff_upper,
    rho_oracle_context,
    rho_pair,
)

__version__ = "0.1.0"
