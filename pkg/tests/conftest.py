import pytest

from nanocavity.physics import CavityGeometry, DriveSettings, Particle, derive_mode

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ref_geometry():
    return CavityGeometry(length=130e-6, mirror_radius=1.3e-3, wavelength=1547e-9, finesse=34000)


@pytest.fixture(scope="session")
def ref_mode(ref_geometry):
    return derive_mode(ref_geometry)


@pytest.fixture(scope="session")
def silica150():
    return Particle.of_material("silica", 150e-9)


@pytest.fixture(scope="session")
def ref_drive(ref_mode):
    return DriveSettings.in_linewidths(-2.3, ref_mode)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
