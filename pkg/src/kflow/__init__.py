"""Knowledge-flow analysis of security protocols."""

from .dsl import ParseError, parse, render
from .engine import Report, TheoremSpec, analyze, check_theorem, extract_trace, saturate
from .protocols import BUILTINS, ProtocolSpec, cpuf_renewal, ns, nsl, otway_rees
from .terms import ValueTable

__all__ = [
    "BUILTINS",
    "ParseError",
    "ProtocolSpec",
    "Report",
    "TheoremSpec",
    "ValueTable",
    "analyze",
    "check_theorem",
    "cpuf_renewal",
    "extract_trace",
    "ns",
    "nsl",
    "otway_rees",
    "parse",
    "render",
    "saturate",
]

__version__ = "0.1.0"
