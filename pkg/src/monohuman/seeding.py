"""Deterministic seed fan-out.

A single master seed expands into independent per-purpose seeds by hashing
(master, label, counter) with SHA-256 and taking the first 8 bytes. The
scheme is order-free: a stage's seed depends only on its label and index,
never on how many other stages ran before it.
"""

import hashlib

import numpy as np


def derive_seed(master_seed: int, label: str, counter: int = 0) -> int:
    """Derive a 63-bit seed from (master_seed, label, counter)."""
    payload = f"{master_seed}:{label}:{counter}".encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def rng_for(master_seed: int, label: str, counter: int = 0) -> np.random.Generator:
    """NumPy generator seeded via :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(master_seed, label, counter))
