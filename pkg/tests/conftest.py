import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anymeta.evalue_core import EffectScale


@pytest.fixture(scope="session")
def bet_50():
    return EffectScale.from_ve(0.50)


@pytest.fixture(scope="session")
def null_30():
    return EffectScale.from_ve(0.30)


@pytest.fixture(scope="session")
def truth_60():
    return EffectScale.from_ve(0.60)
