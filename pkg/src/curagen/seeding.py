"""Deterministic seed derivation.

Every random draw in the engine flows from one top-level seed through
labeled derivations, so a pipeline run is a pure function of its config.
Python's builtin ``hash`` is salted per process and must never be used
here; blake2b keeps derived seeds stable across runs and platforms.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Collapse labeled parts into a 64-bit seed.

    Parts are joined with the unit-separator control character, which can
    never occur inside a whitespace-split word, so distinct part tuples
    cannot collide by concatenation.
    """
    text = "\x1f".join(str(part) for part in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def rng_for(*parts: object) -> np.random.Generator:
    """A PCG64 generator seeded from the derived seed of ``parts``."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
