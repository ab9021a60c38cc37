import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schpacket.errors import PotentialEvaluationError
from schpacket.potentials import PotentialModel


def test_builtin_kinds():
    assert PotentialModel.free().taylor(3.0) == (0.0, 0.0, 0.0)
    assert PotentialModel.linear(2.0).taylor(1.5) == pytest.approx((-3.0, -2.0, 0.0))
    assert PotentialModel.harmonic(2.0).taylor(1.0) == pytest.approx((2.0, 4.0, 4.0))
    assert PotentialModel.harmonic(1.0, center=1.0).taylor(1.0) == pytest.approx((0.0, 0.0, 1.0))
    assert PotentialModel.harmonic(1.0).is_quadratic
    assert not PotentialModel.polynomial([0, 0, 0, 1]).is_quadratic


@settings(max_examples=50, deadline=None)
@given(c=st.lists(st.floats(-5, 5), min_size=1, max_size=6), q=st.floats(-3, 3))
def test_polynomial_taylor_matches_value(c, q):
    pot = PotentialModel.polynomial(c)
    V, dV, d2V = pot.taylor(q)
    h = 1e-4
    vals = pot.value(np.array([q - h, q, q + h]))
    assert V == pytest.approx(vals[1], abs=1e-9)
    assert dV == pytest.approx((vals[2] - vals[0]) / (2 * h), abs=1e-5 * (1 + abs(dV)))
    assert d2V == pytest.approx((vals[2] - 2 * vals[1] + vals[0]) / h ** 2, abs=1e-3 * (1 + abs(d2V)))


def test_custom_errors_are_wrapped():
    pot = PotentialModel.custom(lambda q, t: (1.0 / q, 0.0, 0.0))
    with pytest.raises(PotentialEvaluationError):
        pot.taylor(0.0)
    with pytest.raises(PotentialEvaluationError):
        PotentialModel.custom(lambda q, t: (np.nan, 0.0, 0.0)).taylor(1.0)
    with pytest.raises(ValueError):
        pot.value(np.zeros(3))


def test_dict_round_trip():
    for pot in (PotentialModel.free(), PotentialModel.linear(0.5), PotentialModel.harmonic(1.3, 2.0, 0.4),
                PotentialModel.polynomial([1.0, 0.0, 0.5, 0.1])):
        assert PotentialModel.from_dict(pot.to_dict()) == pot
    with pytest.raises(ValueError, match="unknown key"):
        PotentialModel.from_dict({"kind": "harmonic", "omega": 1.0, "omgea": 2.0})
    with pytest.raises(ValueError):
        PotentialModel.from_dict({"kind": "quartic"})
