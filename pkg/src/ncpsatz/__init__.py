"""Sum-of-squares certificates and matrix witnesses for noncommutative
polynomials on free spectrahedra (domains of monic linear pencils)."""

from .freealg import MatPoly, parse_poly, format_poly, evaluate, enumerate_basis, sigma
from .pencil import MonicPencil, linearize, concave_decompose, is_bounded, unit_certificate, NoUnitCertificate
from .sdp import SdpProblem, SdpSolution, solve, export_sdpa
from .certify import (Certificate, QuadModuleSpec, membership, certify_nonneg, certify_general,
                      verify_certificate, random_eval_check)
from .moment import MomentFunctional, Witness, refute, gns_extract, flatness_check, functional_from_witness
from .domination import DominationCertificate, check_domination, strengthen_bounded, compose

__version__ = "0.1.0"

__all__ = [
    "MatPoly", "parse_poly", "format_poly", "evaluate", "enumerate_basis", "sigma",
    "MonicPencil", "linearize", "concave_decompose", "is_bounded", "unit_certificate", "NoUnitCertificate",
    "SdpProblem", "SdpSolution", "solve", "export_sdpa",
    "Certificate", "QuadModuleSpec", "membership", "certify_nonneg", "certify_general",
    "verify_certificate", "random_eval_check",
    "MomentFunctional", "Witness", "refute", "gns_extract", "flatness_check", "functional_from_witness",
    "DominationCertificate", "check_domination", "strengthen_bounded", "compose",
]
