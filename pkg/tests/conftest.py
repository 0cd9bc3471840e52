import pytest

from layoutlab.circuits import load_circuit
from layoutlab.explore import ExplorationConfig, baseline_pnr
from layoutlab.netlist import apply_fingers, enumerate_finger_permutations
from layoutlab.tech import TechnologyCard


@pytest.fixture(scope="session")
def tech():
    return TechnologyCard()


@pytest.fixture(scope="session")
def ota():
    return load_circuit("five_transistor_ota")


@pytest.fixture(scope="session")
def common_source():
    return load_circuit("common_source")


@pytest.fixture(scope="session")
def lpf():
    return load_circuit("lpf")


@pytest.fixture(scope="session")
def ota_netlists(ota, tech):
    assignments = enumerate_finger_permutations(ota.template, ota.pairs, tech)
    return [apply_fingers(ota.template, a, i)
            for i, a in enumerate(assignments)]


@pytest.fixture(scope="session")
def ota_netlist(ota_netlists):
    return ota_netlists[0]


@pytest.fixture(scope="session")
def ota_baseline(ota_netlist, ota, tech):
    return baseline_pnr(ota_netlist, ota.testbench, tech,
                        ExplorationConfig(seed=11))


@pytest.fixture(scope="session")
def cs_netlist(common_source, tech):
    assignments = enumerate_finger_permutations(
        common_source.template, common_source.pairs, tech)
    return apply_fingers(common_source.template, assignments[0], 0)


@pytest.fixture(scope="session")
def cs_baseline(cs_netlist, common_source, tech):
    return baseline_pnr(cs_netlist, common_source.testbench, tech,
                        ExplorationConfig(seed=11))
