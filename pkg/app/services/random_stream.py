import hashlib
from typing import List

import numpy as np

GENERATOR_FAMILY = "numpy.PCG64/raw64-u53/v1"

_UNIT = 2.0 ** -53


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from an ordered tuple of integers or strings"""
    material = "/".join(str(part) for part in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


class RandomStream:
    """
    Replicate generator with a documented consumption order.

    Every draw consumes exactly one 64-bit output of PCG64 and maps it to
    u = (w >> 11) * 2**-53 in [0, 1). Outputs are prefetched in blocks, which
    does not change the sequence.
    """

    family = GENERATOR_FAMILY

    def __init__(self, seed: int, block_size: int = 8192):
        self.seed = seed
        self._bit_generator = np.random.PCG64(seed)
        self._block_size = block_size
        self._buffer: List[float] = []
        self._position = 0
        self.draws = 0

    def _refill(self) -> None:
        raw = self._bit_generator.random_raw(self._block_size)
        self._buffer = ((raw >> np.uint64(11)).astype(np.float64) * _UNIT).tolist()
        self._position = 0

    def uniform(self) -> float:
        if self._position == len(self._buffer):
            self._refill()
        value = self._buffer[self._position]
        self._position += 1
        self.draws += 1
        return value

    def uniform_between(self, low: float, high: float) -> float:
        return low + (high - low) * self.uniform()

    def index(self, n: int) -> int:
        return min(int(self.uniform() * n), n - 1)

    def sign(self) -> int:
        return -1 if self.uniform() < 0.5 else 1
