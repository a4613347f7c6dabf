import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from aoi_isac import ArmParams


@pytest.fixture
def fig3_params():
    """Single-source showcase configuration (age cap 50)."""
    return ArmParams(lam0=0.75, lam1=0.95, lam2=0.65, c0=5.0, c1=5.5, c2=6.0, trunc_a=50)


def class1(trunc_a: int) -> ArmParams:
    """Fleet class with high reliability and high cost."""
    return ArmParams(lam0=0.95, lam1=0.98, lam2=0.90, c0=7.0, c1=7.0, c2=7.0, trunc_a=trunc_a)


def class2(trunc_a: int) -> ArmParams:
    """Fleet class with low reliability and low cost."""
    return ArmParams(lam0=0.60, lam1=0.80, lam2=0.55, c0=5.0, c1=5.0, c2=5.0, trunc_a=trunc_a)
