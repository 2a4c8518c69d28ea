"""Counter-based splittable random streams.

Every randomized routine in this package draws from a :class:`SplitStream`.
A stream is identified by a 64-bit key; the k-th variate of a stream is a
pure function of (key, k), and child streams derive their keys from the
parent key and an integer tag only.  Consequently a recursive solver can
hand stream ``child(1)`` / ``child(2)`` to its left / right subcall and the
sampled values are independent of evaluation order, which is what makes
parallel trials reproducible.

The mixing function is SplitMix64 (Steele, Lea & Flood), a bijective
finalizer with good avalanche behavior.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_SEED_SALT = 0x5851F42D4C957F2D
_CHILD_SALT = 0xD1B54A32D192ED03


def mix64(z: int) -> int:
    """SplitMix64 finalizer on 64-bit integers."""
    z = (z + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitStream:
    """A splittable stream of uniform variates.

    Streams are cheap value-like objects; two streams constructed with the
    same key produce identical draw sequences.
    """

    __slots__ = ("_key", "_ctr")

    def __init__(self, key: int):
        self._key = key & _MASK
        self._ctr = 0

    @classmethod
    def from_seed(cls, seed: int) -> "SplitStream":
        return cls(mix64((seed ^ _SEED_SALT) & _MASK))

    @property
    def key(self) -> int:
        return self._key

    def next_u64(self) -> int:
        self._ctr += 1
        return mix64((self._key + self._ctr * _GAMMA) & _MASK)

    def uniform(self) -> float:
        """Uniform draw in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + self.uniform() * (hi - lo)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n).  Modulo bias is < 2**-40 for desk-scale n."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return self.next_u64() % n

    def child(self, *tags: int) -> "SplitStream":
        """Derive an independent stream from this stream's key and integer tags.

        Derivation depends only on the key, never on how many draws were
        taken, so sibling subcomputations cannot perturb each other.
        """
        key = self._key
        for tag in tags:
            key = mix64((key ^ mix64((tag ^ _CHILD_SALT) & _MASK)) & _MASK)
        return SplitStream(key)

    def shuffled(self, items: list) -> list:
        """Fisher-Yates shuffle driven by this stream; returns a new list."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.randint(i + 1)
            out[i], out[j] = out[j], out[i]
        return out


def as_stream(rng: "SplitStream | int | None", *, default_seed: int = 0) -> SplitStream:
    """Accept a stream, an integer seed, or None (uses ``default_seed``)."""
    if isinstance(rng, SplitStream):
        return rng
    if rng is None:
        return SplitStream.from_seed(default_seed)
    return SplitStream.from_seed(int(rng))
