"""Deterministic, splittable random-number streams.

Every stochastic operation in the package takes an RngStream.  A stream is
addressed by (seed, stream_id); replication r of an experiment always uses
stream_id = r, so any single replicate can be reproduced in isolation and
results never depend on how replicates are distributed over workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """Address of one reproducible random stream.

    Identical (seed, stream_id) always yields the identical sample path;
    distinct stream_ids give statistically independent streams (counter-based
    Philox generator keyed by a spawned SeedSequence).
    """

    seed: int
    stream_id: int = 0
    subpath: tuple = ()

    def generator(self) -> np.random.Generator:
        key = (self.stream_id,) + tuple(self.subpath)
        ss = np.random.SeedSequence(self.seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))

    def replicate(self, r: int) -> "RngStream":
        """Stream for replication r of the experiment rooted at this stream."""
        return RngStream(self.seed, r, self.subpath)

    def substream(self, k: int) -> "RngStream":
        """Derive a child stream (one per quadrature node, battery, ...).

        Children live one spawn level deeper, so they can never collide with
        replication streams of the same root.
        """
        return RngStream(self.seed, self.stream_id, tuple(self.subpath) + (k,))
