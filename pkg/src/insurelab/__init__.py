"""Insurability of i.i.d. loss models on the naturals.

Distributions and divergences live in ``dist``, model classes and
quantizations in ``classes``, loss-domination schemes in ``schemes``,
attacks in ``adversary`` and simulation plus lemma suites in ``harness``.
"""

from .adversary import (
    AttackCertificate,
    AttackShortfall,
    NcsAttackParams,
    attack_allzero,
    attack_deceptive,
    exact_allzero_bankruptcy,
    ncs_params,
)
from .classes import (
    Centroid,
    ConstructionError,
    DeceptionWitness,
    ModelClass,
    Quantization,
    check_witness,
    entropy_class,
    finite_class,
    monotone_bad_q,
    quantize_finite_class,
    sample_entropy_bounded_monotone,
    sample_uniform_class,
    uniform_class,
)
from .dist import (
    DomainError,
    PiecewiseLinearCdf,
    Pmf,
    TailHeadReport,
    ValidationError,
    build_cdf,
    cdf_inverse,
    empirical,
    jdist,
    l1_dist,
    tail_head,
)
from .harness import (
    LemmaCheckReport,
    SimReport,
    check_lemma_dist,
    check_lemma_dpq,
    check_lemma_jn,
    check_lemma_yeung,
    estimate_bankruptcy,
    exact_bankruptcy_small,
)
from .schemes import (
    DominationScheme,
    History,
    InsuranceScheme,
    bankruptcy_step,
    domination_from_insurance,
    doubling_scheme,
    entropy_scheme,
    generic_scheme,
    insurance_from_domination,
)

__version__ = "0.1.0"
