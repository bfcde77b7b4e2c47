import math

import pytest

import oracles
from ionrot.units import CC, CODATA2018, HBAR, UNITS, to_internal, to_si


def test_coulomb_coupling_si():
    # e^2 / (4 pi eps0) = 2.307077552e-28 J m
    assert CODATA2018.coulomb_coupling == pytest.approx(2.307077552e-28, rel=1e-9)
    assert CODATA2018.coulomb_coupling == pytest.approx(oracles.coulomb_si(), rel=1e-15)


def test_internal_constants():
    assert CC == pytest.approx(oracles.coulomb_internal(), rel=1e-14)
    assert CC == pytest.approx(138935.4576923951, rel=1e-14)
    assert HBAR == pytest.approx(oracles.hbar_internal(), rel=1e-14)
    assert HBAR == pytest.approx(0.063507799295889, rel=1e-12)


def test_trap_frequency_internal():
    omega = to_internal(2 * math.pi * 1.41e6, "angular-frequency")
    assert omega == pytest.approx(8.859291283123216, rel=1e-14)


@pytest.mark.parametrize("dim", sorted(UNITS.factors))
def test_round_trip(dim):
    for x in (1e-30, 3.7, 1e12):
        assert to_internal(to_si(x, dim), dim) == pytest.approx(x, rel=1e-15)


def test_spring_constant_scale():
    # 1 amu/us^2 in N/m
    assert to_si(1.0, "spring-constant") == pytest.approx(1.66053906660e-15, rel=1e-14)


def test_unknown_dimension():
    with pytest.raises(ValueError, match="unknown dimension"):
        UNITS.factor("charge")
