from __future__ import annotations

import pytest

from sessionkit import contract, gen_random

# The running example: a voting client against several ballot services.
VOTER = "rec x. !login.(wrong.x + overload.x + ok.!voteA)"
BALLOT_AB = "rec x. login.(!wrong.x (+) !overload.x (+) !ok.(voteA + voteB))"
BALLOT_ABC = "rec x. login.(!wrong.x (+) !ok.(voteA + voteB + voteC))"
BALLOT_SKP = (
    "rec x. login.(!wrong.!infoW.x (+) !overload.x (+) "
    "!ok.!id.(voteA.(va1 + va2) + voteB.(vb1 + vb2) + voteC.(vc1 + vc2)))"
)
BALLOT_MALICIOUS = "login.!wrong.rec x. !infoW.x"


@pytest.fixture(scope="session")
def voter():
    return contract(VOTER)


@pytest.fixture(scope="session")
def ballot_ab():
    return contract(BALLOT_AB)


@pytest.fixture(scope="session")
def ballot_skp():
    return contract(BALLOT_SKP)


@pytest.fixture(scope="session")
def ballot_malicious():
    return contract(BALLOT_MALICIOUS)


def random_pairs(count: int, seed_base: int = 0, max_depth: int = 6, alphabet: int = 4):
    """Deterministic stream of contract pairs with varied depth/alphabet."""
    for i in range(count):
        depth = 1 + (i % max_depth)
        width = 2 + (i % (alphabet - 1)) if alphabet > 2 else alphabet
        yield (
            gen_random(seed_base + 2 * i, depth, width),
            gen_random(seed_base + 2 * i + 1, depth, width),
        )
