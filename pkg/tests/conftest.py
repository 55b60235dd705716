import pytest

from kflow.engine import analyze_binding
from kflow.model import Scenario
from kflow.protocols import cpuf_renewal, ns, nsl, otway_rees

LOWE_BINDING = (("Alice", "Oscar"), ("Alice", "Bob"))


@pytest.fixture(scope="session")
def ns_lowe():
    """NS with Alice talking to Oscar and to Bob in parallel."""
    proto = ns()
    return analyze_binding(proto, Scenario.make(proto, honest=2, sessions=2), LOWE_BINDING)


@pytest.fixture(scope="session")
def builtin_analyses(ns_lowe):
    out = {"ns": ns_lowe}
    for make, binding in [
        (nsl, LOWE_BINDING),
        (otway_rees, (("Alice", "Bob"),)),
        (cpuf_renewal, (("Alice",),)),
    ]:
        proto = make()
        w = len(binding)
        out[proto.name] = analyze_binding(proto, Scenario.make(proto, honest=2, sessions=w), binding)
    return out
