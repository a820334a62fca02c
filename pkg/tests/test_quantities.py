import math

import pytest
from hypothesis import given, strategies as st

from converter_forge.quantities import (
    IDEAL, DesignResult, InductorValue, CapacitorValue, ParasiticSet, SpecError,
    StageSpec, Topology, validate_spec,
)

from conftest import STAGE1, STAGE3


def test_stage1_spec_is_valid():
    assert validate_spec(STAGE1) is STAGE1


def test_stage3_spec_is_valid():
    assert validate_spec(STAGE3) is STAGE3


def test_sepic_negative_output_is_polarity_mismatch():
    bad = StageSpec(Topology.SEPIC, 55, -12, 2, 1e5, 0.01, 0.005)
    with pytest.raises(SpecError) as exc:
        validate_spec(bad)
    assert exc.value.violations[0][0] == "output_voltage"
    assert "polarity" in exc.value.violations[0][1]


def test_inverting_positive_output_rejected():
    with pytest.raises(SpecError, match="polarity"):
        validate_spec(StageSpec(Topology.INVERTING_BUCK_BOOST, 5, 12, 0.5, 1e5, 0.01))


def test_every_violation_is_reported():
    bad = StageSpec(Topology.SEPIC, -1, 12, 0, 0, 1.5, None)
    with pytest.raises(SpecError) as exc:
        validate_spec(bad)
    fields = {f for f, _ in exc.value.violations}
    assert fields == {"source_voltage", "output_current", "switching_frequency",
                      "output_ripple_frac", "coupling_cap_ripple_frac"}


def test_topology_from_string():
    s = StageSpec("inverting_buck_boost", 5, -12, 0.5, 1e5, 0.01)
    assert s.topology is Topology.INVERTING_BUCK_BOOST
    assert s.load_resistance == 24
    assert s.output_power == 6


def test_ideal_parasitic_set():
    assert IDEAL.is_ideal
    assert IDEAL.r_l(1) == 0 and IDEAL.r_c(0) == 0
    assert not ParasiticSet(diode_forward_voltage=0.6).is_ideal


def test_per_element_esr_and_broadcast():
    p = ParasiticSet(inductor_esr=(0.1, 0.2), capacitor_esr=0.3)
    assert p.r_l(0) == 0.1 and p.r_l(1) == 0.2
    assert p.r_c(0) == p.r_c(1) == 0.3
    with pytest.raises(SpecError):
        p.r_l(2)


@pytest.mark.parametrize("kw", [{"switch_on_resistance": -0.1}, {"capacitor_esr": (-0.686,)},
                                {"diode_forward_voltage": math.nan}])
def test_negative_or_nan_parasitics_rejected(kw):
    with pytest.raises(SpecError):
        ParasiticSet(**kw)


def test_design_result_lookup():
    d = DesignResult(0.5, 1e-5, 10.0, (InductorValue("L", 1e-5, 1.25e-5),), (CapacitorValue("C", 1e-5, 0.1),))
    assert d.inductor("L").l_selected == 1.25e-5
    assert d.capacitor("C").c == 1e-5
    with pytest.raises(KeyError):
        d.inductor("L9")


pos = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)
frac = st.floats(min_value=1e-4, max_value=0.5)


@given(vs=pos, vo=pos, io=pos, f=st.floats(1e3, 1e7), r=frac, c=frac, inverting=st.booleans())
def test_validate_is_idempotent(vs, vo, io, f, r, c, inverting):
    if inverting:
        spec = StageSpec(Topology.INVERTING_BUCK_BOOST, vs, -vo, io, f, r)
    else:
        spec = StageSpec(Topology.SEPIC, vs, vo, io, f, r, c)
    once = validate_spec(spec)
    assert validate_spec(once) == spec
