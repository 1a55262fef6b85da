"""Hypothesis strategies shared by the test modules."""

from hypothesis import strategies as st

from hypsum.sieve import FunctionSpec, SetS

STANDARD_SPECS = [
    FunctionSpec.id(),
    FunctionSpec.tau(),
    FunctionSpec.omega(),
    FunctionSpec.big_omega(),
    FunctionSpec.log(),
    FunctionSpec.log_kappa(),
    FunctionSpec.reciprocal(),
]


@st.composite
def sets_s(draw):
    """Sets containing 1: an explicit part plus an optional tail."""
    extra = draw(st.lists(st.integers(2, 8), max_size=4))
    tail = draw(st.one_of(st.none(), st.integers(2, 10)))
    explicit = {v for v in {1, *extra} if tail is None or v < tail}
    return SetS(tuple(explicit), tail)


@st.composite
def function_specs(draw):
    kind = draw(st.sampled_from(["standard", "seta", "powerlog"]))
    if kind == "standard":
        return draw(st.sampled_from(STANDARD_SPECS))
    if kind == "seta":
        eta = draw(st.sampled_from([0.0, 0.5, 1.0, 2.0]))
        return FunctionSpec.s_eta(draw(sets_s()), eta)
    beta = draw(st.sampled_from([-1.0, -0.5, 0.0, 0.5]))
    delta = draw(st.sampled_from([-1.0, 0.0, 1.0, 2.0]))
    return FunctionSpec.power_log(beta, delta)
