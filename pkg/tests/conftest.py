import functools

import pytest

from converter_forge import data_path
from converter_forge.circuit import build_stage_circuit
from converter_forge.quantities import StageSpec, Topology
from converter_forge.simulator import SimConfig, run_to_steady_state
from converter_forge.sizing import design_stage

STAGE1 = StageSpec(Topology.SEPIC, 55.0, 12.0, 2.0, 1e5, 0.01, 0.005, source_current=10.0)
STAGE2 = StageSpec(Topology.SEPIC, 12.0, 5.0, 1.0, 1e5, 0.01, 0.01)
STAGE3 = StageSpec(Topology.INVERTING_BUCK_BOOST, 5.0, -12.0, 0.5, 1e5, 0.01)
REF_STAGES = (STAGE1, STAGE2, STAGE3)

CHAIN_SPEC_FILE = data_path("three_stage_chain.json")
STAGE3_PARASITICS_FILE = data_path("stage3_parasitics.json")
SCENARIO_FILE = data_path("scenario_35w.json")


@functools.lru_cache(maxsize=None)
def steady(spec, parasitics=None, steps=2000, l_scale=None):
    """Cached steady-state run of one stage; ``l_scale`` multiplies L_min."""
    from converter_forge.quantities import IDEAL
    design = design_stage(spec)
    inds = None if l_scale is None else [l_scale * i.l_min for i in design.inductances]
    circuit = build_stage_circuit(design, spec, parasitics or IDEAL, inductances=inds)
    return design, circuit, run_to_steady_state(circuit, SimConfig(steps_per_period=steps))


# acceptance summary: one line per criterion, printed at the end of the run
_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    key, title = mark.args
    ok = call.excinfo is None
    prev = _criteria.get(key, (title, True, []))
    prev[2].append(item.name)
    _criteria[key] = (title, prev[1] and ok, prev[2])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_criteria, key=lambda k: (isinstance(k, str), k if isinstance(k, int) else 0, str(k))):
        title, ok, _ = _criteria[key]
        tr.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(scope="session")
def ref_designs():
    return [design_stage(s) for s in REF_STAGES]
