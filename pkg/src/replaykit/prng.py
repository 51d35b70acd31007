"""Deterministic, order-independent random number generation.

Every randomized draw in the library runs on a counter-based generator keyed
by (seed, class_label), so per-class results never depend on the order in
which classes are processed or on draws made for other classes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def keyed_generator(seed: int, class_label: str) -> np.random.Generator:
    """Build the generator for one (seed, class_label) stream.

    The Philox key is the first 16 bytes of SHA-256 over the little-endian
    64-bit seed followed by the UTF-8 label, so distinct labels get
    independent streams and identical inputs replay identically.
    """
    material = seed.to_bytes(8, "little") + class_label.encode("utf-8")
    digest = hashlib.sha256(material).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
