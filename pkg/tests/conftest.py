import random
from fractions import Fraction

import pytest

from gkserver import MemorylessPolicy


def random_policy(k: int, rng: random.Random, max_weight: int = 40) -> MemorylessPolicy:
    """Random rational policy from integer weights (always valid, rarely uniform)."""
    weights = [rng.randint(1, max_weight) for _ in range(k)]
    total = sum(weights)
    return MemorylessPolicy.from_probs([Fraction(w, total) for w in weights])


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
