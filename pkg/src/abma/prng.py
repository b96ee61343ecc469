"""Seeded PRNG used by the simulator: xoshiro256** seeded via splitmix64.

The generator is part of the trace format contract: a trace produced from a
given (config, seed) pair must be bit-identical across runs and platforms,
so the algorithm is fixed here rather than delegated to whatever the host
language's default generator happens to be. Both algorithms are the public
domain designs by Blackman and Vigna.

Draw-order contract (consumers must keep it stable): the device simulator
draws, per tick, one noise factor per observed quantity per emitting app, in
app emission order and field order (data, power, battery, current).
"""

from __future__ import annotations

PRNG_NAME = "xoshiro256**/splitmix64"

_MASK64 = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class SplitMix64:
    """64-bit state expander; used only to seed Xoshiro256StarStar."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** generator with splitmix64 state initialization."""

    def __init__(self, seed: int):
        sm = SplitMix64(seed)
        self._s = [sm.next_u64() for _ in range(4)]

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) using the top 53 bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def stream_seed(seed: int, stream: str) -> int:
    """Derive a substream seed from a run seed and a stream label.

    Keeps independent noise streams (e.g. telemetry jitter) decoupled from
    any future consumer of the run seed without changing existing streams.
    """
    return SplitMix64((seed & _MASK64) ^ _fnv1a64(stream)).next_u64()
