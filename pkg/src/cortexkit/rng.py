"""Splittable seeded RNG.

Every stochastic operation in cortexkit draws from a SeededRng stream.
Streams are addressed by (master_seed, path-of-labels): the same address
always replays the identical bit stream, and distinct labels yield
statistically independent streams. Labels are hashed with SHA-256 so that
stream identity depends only on the label text, never on interning or
insertion order.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["SeededRng"]


def _label_words(label: str) -> tuple[int, ...]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


class SeededRng:
    """Deterministic random stream addressed by a master seed and a label path.

    `stream(label)` derives an independent child stream; the parent is left
    untouched, so handing children to per-subject workers is race-free as
    long as each stream has a single consumer.
    """

    def __init__(self, master_seed: int, stream_id: str = "root", _path: tuple[int, ...] = ()):
        if not isinstance(master_seed, (int, np.integer)):
            raise TypeError("master_seed must be an integer")
        self.master_seed = int(master_seed)
        self.stream_id = stream_id
        self._path = _path if _path else _label_words(stream_id)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self._path)
        self.gen = np.random.Generator(np.random.PCG64(seq))

    def stream(self, label: str) -> "SeededRng":
        """Derive an independent child stream for `label`."""
        child = SeededRng.__new__(SeededRng)
        child.master_seed = self.master_seed
        child.stream_id = f"{self.stream_id}/{label}"
        child._path = self._path + _label_words(label)
        seq = np.random.SeedSequence(child.master_seed, spawn_key=child._path)
        child.gen = np.random.Generator(np.random.PCG64(seq))
        return child

    def __repr__(self) -> str:  # pragma: no cover
        return f"SeededRng(seed={self.master_seed}, stream={self.stream_id!r})"
