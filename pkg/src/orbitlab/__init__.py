"""Certified computations for diagonal orbits on spaces of lattices and toral semigroup orbits."""

from __future__ import annotations

from .errors import (
    ConfigError,
    IndeterminatePrecision,
    MembershipFailure,
    NotAUnit,
    OrbitLabError,
    PrecisionFailure,
    PreconditionViolated,
    RankDeficient,
)
from .exact import ALPHA, BigRational, QuarticInt, RealInterval, enclose, quartic_mul, sigma
from .fields import NumberField, embedding_matrix, unit_action_matrix, wall_avoidance_check, compact_orbit_probe
from .homogeneous import (
    A1Element,
    DiagonalElement,
    GroupWord,
    PairForm,
    QuarticMatrix,
    avoidance_experiment,
    build_y,
    commutation_check,
    compact_twin_check,
    density_probe,
    det_split,
    inclusion_check,
    k_membership_decompose,
    phi_embed,
    psi_embed,
    su_membership,
)
from .lattices import UnimodularLattice, lll_reduce, quotient_distance, systole
from .torus import (
    SemigroupElement,
    TorusParams,
    TorusPoint,
    act,
    certify_no_relation,
    hitting_index,
    make_point,
    minimal_N,
    semigroup_compose,
    verify_nondensity,
)

__version__ = "0.1.0"
