"""Named, counter-based random streams.

Every random draw in the library comes from a generator built here. A stream
is identified by the user seed, a stream name and a tuple of integer counters
(for example a grid cell and a replicate index), so the numbers a replicate
sees do not depend on which worker runs it or in which order.
"""

import numpy as np

__all__ = ["STREAMS", "stream"]

STREAMS = {
    "partition": 1,
    "sampling": 2,
    "simulation": 3,
    "design": 4,
    "beta": 5,
}


def stream(seed: int, name: str, *counters: int) -> np.random.Generator:
    """
    Build the generator for ``(seed, name, *counters)``.

    Parameters
    ----------
    seed : int
        User seed (non-negative).
    name : str
        One of ``STREAMS``.
    *counters : int
        Non-negative integers locating the stream, e.g. ``(cell, replicate)``.

    Returns
    -------
    numpy.random.Generator
        A Philox-backed generator.
    """
    if name not in STREAMS:
        raise KeyError(f"Unknown rng stream '{name}'")
    key = (STREAMS[name], *(int(c) for c in counters))
    seq = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
