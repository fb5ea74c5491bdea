import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from extremal import build_disk_mesh

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def mesh2():
    return build_disk_mesh(16, 2)


@pytest.fixture(scope="session")
def mesh3():
    return build_disk_mesh(16, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(0x5EED)


def inscribed_polygon_area(n):
    """Area of the regular n-gon inscribed in the unit circle."""
    return 0.5 * n * np.sin(2 * np.pi / n)


def loglog_slope(h, err):
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def mean_edge(mesh):
    e = mesh.edges
    return float(np.mean(np.abs(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]])))


def admissible_xi(mesh, rng, amplitude=0.15, degree=3):
    """Random orientation-preserving P1 self-map of the mesh fixing every boundary vertex.

    ``xi(z) = z + (1 - |z|^2) P(z, conj z)`` with a random polynomial ``P``
    shrunk until no triangle flips.
    """
    from extremal import TriMeshMap

    z = mesh.vertices
    j = np.arange(degree + 1)
    a = rng.normal(size=(2, degree + 1)) + 1j * rng.normal(size=(2, degree + 1))
    pert = (1 - np.abs(z) ** 2) * (np.power.outer(z, j) @ a[0] + np.power.outer(np.conj(z), j) @ a[1])
    pert[mesh.boundary_loop] = 0
    scale = amplitude / max(np.max(np.abs(pert)), 1e-300)
    while True:
        xi = TriMeshMap(mesh, z + scale * pert)
        if xi.orientation_preserving:
            return xi
        scale *= 0.5


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance():
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
