import math

import pytest
from hypothesis import given, strategies as st

from converter_forge.losses import (
    LossBreakdown, capacitor_loss, capacitor_rms_current, chain_power_ratios, diode_loss,
    diode_rms_current, efficiency, esr_from_ripple, inductor_conduction_loss, inductor_esr_from_drop,
    mosfet_conduction_loss, scenario_stage_parameters, stage_losses, switch_rms_current,
)
from converter_forge.quantities import IDEAL, ParasiticSet, SpecError
from converter_forge.sizing import design_stage

from conftest import STAGE1, STAGE3

rel = pytest.approx
D3 = 0.706

io_s = st.floats(1e-3, 10)
d_s = st.floats(1e-3, 0.999)
r_s = st.floats(0, 10)


class TestInductor:
    def test_stage3(self):
        assert inductor_conduction_loss(0.142, 0.5, D3) == rel(0.411, rel=5e-3)

    def test_ideal(self):
        assert inductor_conduction_loss(0, 0.5, D3) == 0

    def test_doubled_current(self):
        assert inductor_conduction_loss(0.142, 1.0, D3) == rel(1.643, rel=5e-3)

    def test_esr_from_drop(self):
        assert inductor_esr_from_drop(5, -12, 1.7) == rel(0.01 * 17 / 1.7)


class TestSwitch:
    def test_rms_stage3(self):
        assert switch_rms_current(0.5, D3) == rel(1.429, abs=2e-3)

    def test_printed_rms_is_erratum(self):
        assert abs(switch_rms_current(0.5, D3) - 1.68) > 0.2

    def test_rms_vanishes(self):
        assert switch_rms_current(1, 1e-12) < 1e-5

    def test_rms_half(self):
        # sqrt(0.5)/0.5 evaluates to 1.414, not 2.828
        assert switch_rms_current(1, 0.5) == rel(math.sqrt(0.5) / 0.5)
        assert switch_rms_current(1, 0.5) == rel(1.414, abs=1e-3)

    def test_loss_stage3(self):
        assert mosfet_conduction_loss(0.1, 0.5, D3) == rel(0.204, abs=1e-3)

    def test_printed_loss_is_erratum(self):
        assert abs(mosfet_conduction_loss(0.1, 0.5, D3) - 0.285) > 0.05

    def test_ideal(self):
        assert mosfet_conduction_loss(0, 0.5, D3) == 0


class TestCapacitor:
    def test_rms_stage3(self):
        assert capacitor_rms_current(0.5, D3) == rel(0.775, abs=1e-3)

    def test_printed_rms_is_erratum(self):
        assert abs(capacitor_rms_current(0.5, D3) - 2.84) > 1

    def test_rms_half(self):
        assert capacitor_rms_current(3.3, 0.5) == rel(3.3)

    def test_rms_linear(self):
        assert capacitor_rms_current(1, D3) == rel(1.550, abs=2e-3)

    def test_loss_stage3_magnitude(self):
        assert capacitor_loss(0.686, 0.5, D3) == rel(0.412, rel=5e-3)

    def test_ideal(self):
        assert capacitor_loss(0, 2, 0.3) == 0

    def test_negative_esr_rejected(self):
        with pytest.raises(SpecError):
            capacitor_loss(-0.686, 0.5, D3)


class TestDiode:
    def test_rms_stage3(self):
        assert diode_rms_current(0.5, D3) == rel(0.922, abs=1e-3)

    def test_printed_rms_is_erratum(self):
        # the printed 1.7 A is Io/(1-D) without the square root
        assert diode_rms_current(0.5, D3) != rel(1.7, abs=0.1)
        assert 0.5 / (1 - D3) == rel(1.7, abs=0.01)

    def test_rms_limit(self):
        assert diode_rms_current(2, 1e-12) == rel(2)

    def test_rms_three_quarters(self):
        assert diode_rms_current(1, 0.75) == rel(2)

    def test_loss_forward_drop(self):
        assert diode_loss(0.6, 0, 0.5, D3) == rel(0.3)

    def test_ideal(self):
        assert diode_loss(0, 0, 0.5, D3) == 0

    def test_with_series_resistance(self):
        assert diode_loss(0.6, 0.1, 0.5, D3) == rel(0.3 + 0.1 * 0.25 / 0.294, rel=1e-3)
        assert diode_loss(0.6, 0.1, 0.5, D3) == rel(0.385, abs=1e-3)


class TestEsr:
    def test_stage3_magnitude(self):
        assert esr_from_ripple(-0.12, 0.175) == rel(0.686, abs=1e-3)

    def test_zero(self):
        assert esr_from_ripple(0, 1) == 0

    def test_direct(self):
        assert esr_from_ripple(1, 2) == 0.5

    def test_zero_swing(self):
        with pytest.raises(SpecError):
            esr_from_ripple(0.1, 0)


class TestEfficiency:
    def _b(self, *vals, p_out=24.0):
        return LossBreakdown(*vals, 0.0, output_power=p_out)

    def test_lossless(self):
        assert efficiency(24, self._b(0, 0, 0, 0)) == 1

    def test_sum(self):
        b = self._b(0.411, 0.204, 0.412, 0.3)
        assert b.total == rel(1.327)
        assert efficiency(24, b) == rel(24 / 25.327, rel=1e-9)
        assert b.efficiency == rel(0.9476, abs=1e-4)

    @given(p=st.floats(0.1, 1e3), a=st.floats(0, 100), extra=st.floats(1e-6, 100))
    def test_monotone_and_complement(self, p, a, extra):
        lo, hi = self._b(a, 0, 0, 0, p_out=p), self._b(a + extra, 0, 0, 0, p_out=p)
        assert efficiency(p, hi) < efficiency(p, lo)
        assert efficiency(p, lo) + lo.total / (p + lo.total) == rel(1.0)
        assert 0 < efficiency(p, lo) <= 1


class TestIdentities:
    @given(io=io_s, d=d_s, r=r_s)
    def test_rms_identities(self, io, d, r):
        assert mosfet_conduction_loss(r, io, d) == rel(r * switch_rms_current(io, d) ** 2, rel=1e-12, abs=1e-300)
        assert capacitor_loss(r, io, d) == rel(r * capacitor_rms_current(io, d) ** 2, rel=1e-12, abs=1e-300)
        assert diode_loss(0, r, io, d) == rel(r * diode_rms_current(io, d) ** 2, rel=1e-12, abs=1e-300)

    @given(io=io_s, d=d_s, r=r_s, vf=st.floats(0, 2), k=st.floats(0.1, 10))
    def test_quadratic_scaling(self, io, d, r, vf, k):
        for fn in (inductor_conduction_loss, mosfet_conduction_loss, capacitor_loss):
            assert fn(r, k * io, d) == rel(k * k * fn(r, io, d), rel=1e-9, abs=1e-300)
        rf_part = diode_loss(vf, r, io, d) - vf * io
        assert diode_loss(vf, r, k * io, d) - vf * k * io == rel(k * k * rf_part, rel=1e-6, abs=1e-9)

    @pytest.mark.parametrize("fn", [inductor_conduction_loss, mosfet_conduction_loss, capacitor_loss])
    @pytest.mark.parametrize("io,d", [(0, 0.5), (1, 0), (1, 1)])
    def test_domain(self, fn, io, d):
        with pytest.raises(SpecError):
            fn(0.1, io, d)


class TestRatios:
    def test_stage1(self):
        (r,) = chain_power_ratios([(550, 24)])
        assert r.ratio == rel(0.0436, abs=1e-4) and r.feasible

    def test_scenario(self):
        a, b = chain_power_ratios([(35, 11), (11, 6)])
        assert a.ratio == rel(0.314, abs=1e-3) and a.feasible
        assert b.ratio == rel(0.545, abs=1e-3) and b.feasible

    def test_raw_ratio_not_clamped(self):
        (r,) = chain_power_ratios([(5, 24)])
        assert r.ratio == rel(4.8)
        assert not r.feasible

    def test_non_positive(self):
        with pytest.raises(SpecError):
            chain_power_ratios([(0, 1)])

    @given(st.lists(st.floats(0.1, 1e3), min_size=2, max_size=6))
    def test_ratios_multiply(self, powers):
        pairs = list(zip(powers[:-1], powers[1:]))
        prod = math.prod(r.ratio for r in chain_power_ratios(pairs))
        assert prod == rel(powers[-1] / powers[0], rel=1e-9)


class TestScenario:
    def test_stage1(self):
        s = scenario_stage_parameters(35, 55, 12)
        assert s.source_current == rel(0.636, abs=1e-3)

    def test_stage2_first_principles(self):
        # the printed 1.09 A is 12/11, not 11/12
        s = scenario_stage_parameters(11, 12, 5)
        assert s.source_current == rel(0.917, abs=1e-3)

    def test_stage3(self):
        s = scenario_stage_parameters(6, 5, -12)
        assert s.source_current == rel(1.2)
        assert s.load_resistance == rel(24)

    def test_domain(self):
        with pytest.raises(SpecError):
            scenario_stage_parameters(-1, 5, 12)


class TestStageLosses:
    def test_stage3_reference_parasitics(self):
        p = ParasiticSet(inductor_esr=0.142, switch_on_resistance=0.1, capacitor_esr=0.686,
                         diode_forward_voltage=0.6)
        b = stage_losses(STAGE3, design_stage(STAGE3), p)
        assert b.inductor_loss == rel(0.411, rel=5e-3)
        assert b.switch_conduction_loss == rel(0.204, abs=1e-3)
        assert b.capacitor_loss == rel(0.412, rel=5e-3)
        assert b.diode_loss == rel(0.3, rel=5e-3)
        assert b.output_power == 6

    @pytest.mark.parametrize("spec", [STAGE1, STAGE3])
    def test_ideal(self, spec):
        b = stage_losses(spec, design_stage(spec), IDEAL)
        assert b.total == 0
        assert b.efficiency == 1

    def test_sepic_per_inductor_currents(self):
        d = design_stage(STAGE1)
        b = stage_losses(STAGE1, d, ParasiticSet(inductor_esr=(1.0, 0.0)))
        assert b.inductor_loss == rel((2 * d.duty / (1 - d.duty)) ** 2)
        b = stage_losses(STAGE1, d, ParasiticSet(inductor_esr=(0.0, 1.0)))
        assert b.inductor_loss == rel(4.0)

    def test_constant_switching_loss(self):
        b = stage_losses(STAGE3, design_stage(STAGE3), ParasiticSet(constant_switching_loss=0.25))
        assert b.other_losses == 0.25 and b.total == 0.25
