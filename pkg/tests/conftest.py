from __future__ import annotations

from dataclasses import dataclass

import pytest

from emf_exposure.clock import SimulatedClock
from emf_exposure.scpi import ScpiClient
from emf_exposure.simulator import Scene, SceneConfig, SimulatorServer
from emf_exposure.storage import default_plan


@pytest.fixture(scope="session")
def plan():
    return default_plan()


@dataclass
class Sim:
    scene: Scene
    clock: SimulatedClock
    server: SimulatorServer
    instr: ScpiClient


@pytest.fixture
def make_sim(plan):
    """Factory: scene config -> running simulator with a connected client on a shared clock."""
    running: list[Sim] = []

    def factory(config: SceneConfig | None = None, **kwargs) -> Sim:
        cfg = config or SceneConfig(plan=plan, **kwargs)
        clock = SimulatedClock()
        scene = Scene(cfg, clock)
        server = SimulatorServer(scene, port=0).start()
        host, port = server.address
        instr = ScpiClient.connect(host, port, clock=clock)
        sim = Sim(scene, clock, server, instr)
        running.append(sim)
        return sim

    yield factory
    for sim in running:
        sim.instr.close()
        sim.server.stop()


# --- acceptance summary -----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    n = marker.args[0]
    status = "PASS" if rep.passed else "FAIL"
    prev = ACCEPTANCE.get(n)
    if prev is None or prev[0] == "PASS":
        ACCEPTANCE[n] = (status, marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")
