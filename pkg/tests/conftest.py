import pytest

from routebench.gen import stream
from routebench.mask import save_mask
from routebench.synth import make_mask


def write_synthetic(directory, count, seed=0, size=128):
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        save_mask(make_mask(stream(seed, i), size), directory / f"mask{i:03d}.png")
    return directory


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    return write_synthetic(tmp_path_factory.mktemp("masks"), 6)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_results():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
