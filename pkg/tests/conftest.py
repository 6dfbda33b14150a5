import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bpve import Binary, Environment, Poisson, dirac  # noqa: E402

RARE_JUMP = '{"mode": "rule", "entries": [{"family": "finite", "atoms": [[0, "1-1/k"], ["k+2", "1/k"]]}]}'
FALLING_ASLEEP = '{"mode": "rule", "entries": [{"family": "symmetric", "p": "1/k^2"}]}'


def rare_jump() -> Environment:
    return Environment.from_spec(RARE_JUMP)


def falling_asleep() -> Environment:
    return Environment.from_spec(FALLING_ASLEEP)


def fixtures() -> dict[str, Environment]:
    return {
        "rare_jump": rare_jump(),
        "falling_asleep": falling_asleep(),
        "binary_half": Environment.constant(Binary(0.5)),
        "binary_08": Environment.constant(Binary(0.8)),
        "poisson_half": Environment.constant(Poisson(0.5)),
        "dirac_one": Environment.constant(dirac(1)),
        "dirac_two": Environment.constant(dirac(2)),
    }


@pytest.fixture
def spec_file(tmp_path):
    def make(text: str, name: str = "env.json") -> Path:
        p = tmp_path / name
        p.write_text(text)
        return p
    return make
