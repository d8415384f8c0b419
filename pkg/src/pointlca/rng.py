"""Portable seeded generator: xoshiro256** seeded through SplitMix64.

The whole sequence is defined by integer arithmetic modulo 2**64, so the same
seed yields the same draws in any implementation:

* seeding: the four state words are four successive SplitMix64 outputs
  starting from ``seed``;
* ``next_u64``: xoshiro256** (Blackman & Vigna);
* ``random``: ``(next_u64() >> 11) * 2**-53``, a double in ``[0, 1)``;
* ``bounded(n)``: rejection sampling, values below ``(2**64 - n) % n`` are
  redrawn, then ``r % n``;
* ``shuffle``: Fisher-Yates from the last index down, ``j = bounded(i + 1)``.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step.  Returns ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, stream: int) -> int:
    """Independent child seed for substream ``stream`` of ``seed``."""
    _, out = splitmix64((seed ^ ((stream * GOLDEN_GAMMA) & MASK64)) & MASK64)
    return out


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


@njit(cache=True)
def _fill_uniform_kernel(state, out, lo, hi):
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
    span = hi - lo
    for i in range(out.size):
        x = s1 * np.uint64(5)
        x = (x << np.uint64(7)) | (x >> np.uint64(57))
        x = x * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
        out[i] = lo + span * (float(x >> np.uint64(11)) * (1.0 / 9007199254740992.0))
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


class Xoshiro256:
    """xoshiro256** generator with the draw conventions in the module docstring."""

    def __init__(self, seed: int = 0):
        seed = int(seed)
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        sm = seed
        words = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            words.append(out)
        self.s = words

    @classmethod
    def from_state(cls, words):
        g = cls.__new__(cls)
        g.seed = None
        g.s = [int(w) & MASK64 for w in words]
        return g

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def bounded(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = ((1 << 64) - n) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n

    def shuffle(self, arr) -> None:
        """In-place Fisher-Yates shuffle of a 1-D array or list."""
        for i in range(len(arr) - 1, 0, -1):
            j = self.bounded(i + 1)
            arr[i], arr[j] = arr[j], arr[i]

    def sample_without_replacement(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)`` (partial Fisher-Yates, front to back)."""
        if k > n:
            raise ValueError("k > n")
        pool = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + self.bounded(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k].copy()

    def sample_with_replacement(self, n: int, k: int) -> np.ndarray:
        return np.array([self.bounded(n) for _ in range(k)], dtype=np.int64)

    def uniform(self, lo: float, hi: float, size: int) -> np.ndarray:
        """``size`` doubles ``lo + (hi - lo) * random()``, in draw order."""
        out = np.empty(int(size), dtype=np.float64)
        if USE_NUMBA:
            state = np.array(self.s, dtype=np.uint64)
            _fill_uniform_kernel(state, out, float(lo), float(hi))
            self.s = [int(w) for w in state]
        else:
            # Sequential by construction; there is no vectorised form.
            span = hi - lo
            for i in range(out.size):
                out[i] = lo + span * self.random()
        return out
