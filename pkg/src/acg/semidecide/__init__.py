from .certify import NormCertificate, certify_norm, exact_bound, power_iteration, rational_root
from .enumeration import (
    Candidate,
    EnumerationCursor,
    candidate_at,
    enumerate_rational_pairs,
    is_exact_povm,
)
from .exact import RationalMatrix, is_psd_exact
from .harness import (
    LanguageFamily,
    Outcome,
    Verification,
    Witness,
    chsh_family,
    constant_family,
    family_by_name,
    parse_witness,
    replay,
    semidecide,
    serialize_witness,
    toy_language_family,
    verify_witness,
)

__all__ = [
    "Candidate",
    "EnumerationCursor",
    "LanguageFamily",
    "NormCertificate",
    "Outcome",
    "RationalMatrix",
    "Verification",
    "Witness",
    "candidate_at",
    "certify_norm",
    "chsh_family",
    "constant_family",
    "enumerate_rational_pairs",
    "exact_bound",
    "family_by_name",
    "is_exact_povm",
    "is_psd_exact",
    "parse_witness",
    "power_iteration",
    "rational_root",
    "replay",
    "semidecide",
    "serialize_witness",
    "toy_language_family",
    "verify_witness",
]
