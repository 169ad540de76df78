"""Buffered uniform stream shared by both kernel backends.

Drawing uniforms one at a time from numpy has per-call overhead, and the
compiled/pure backends must consume the *same* stream in the same order for
outputs to match bit for bit.  Both backends therefore pull single values
from this buffered reader.
"""

import numpy as np


class UniformSource:
    """Sequential uniform(0,1) draws backed by a numpy Generator."""

    __slots__ = ("_rng", "_block", "_buf", "_idx")

    def __init__(self, rng, block=8192):
        self._rng = rng
        self._block = int(block)
        self._buf = rng.random(self._block)
        self._idx = 0

    def next(self):
        if self._idx >= self._block:
            self._buf = self._rng.random(self._block)
            self._idx = 0
        v = self._buf[self._idx]
        self._idx += 1
        return v
