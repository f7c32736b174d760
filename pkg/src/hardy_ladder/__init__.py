"""Chained CHSH / CH analysis of Hardy's ladder test of nonlocality."""

__version__ = "0.1.0"

from .behavior import (
    Behavior,
    HardyReport,
    NsReport,
    Scenario,
    behavior_from_table,
    ch_values,
    chsh_k,
    correlation,
    hardy_report,
    ns_residual,
    relation_residuals,
)
from .bounds import (
    BoundsRecord,
    DeterministicStrategy,
    extremal_ns_box,
    fig1_dataset,
    local_membership,
    lr_max_chsh,
    maximize_hardy,
    tsirelson_bound,
    upper_limit_L,
)
from .proof import LinearExpr, ProofCertificate, derive_cere2, hardy_zero_set, ns_system
from .quantum import LadderAngles, born_behavior, closed_form_probs, ladder_angles, ladder_identity_residual, p_k_qm
from .sim import CountsTable, EstimateReport, estimate_report, sample_counts

__all__ = [name for name in dir() if not name.startswith("_")]
