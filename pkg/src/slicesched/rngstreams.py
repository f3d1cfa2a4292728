"""Named, reproducible random streams derived from the master seed.

Each stream is identified by a fixed integer purpose tag plus optional
sub-indices (user id, evaluation seed, ...).  Streams with distinct keys are
statistically independent, and the traffic/channel tags are separate from
the policy tag so baseline comparisons can replay identical world randomness
under different scheduling policies.
"""

from __future__ import annotations

import numpy as np

# purpose tags (stable; changing one invalidates recorded golden traces)
TRAFFIC_HRLLC = 0
TRAFFIC_EMBB = 1
CHANNEL = 2
POLICY = 3
CHAIN_INIT = 4


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (master_seed, key)."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))
