"""
Hierarchical seed derivation and counter-based bit streams.

Seeds are derived from a master seed and a key path such as
("trial", 3, "channel"). String keys are hashed to 32-bit words so the path
is stable across runs and platforms.
"""

import hashlib

import numpy as np

PRNG_ID = "philox4x64-10"

# Key domains for the counter-based streams. Code blocks and channel erasures
# never share a key even when the same seed is used for both.
CODE_DOMAIN = 0xC0DE
CHANNEL_DOMAIN = 0xEC4A


def _key_word(part: str | int) -> int:
    if isinstance(part, int):
        return part & 0xFFFFFFFF
    digest = hashlib.blake2b(part.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


def derive_seed(master: int, *path: str | int) -> int:
    """
    Derives a 64-bit seed from a master seed and a key path.

    Args:
        master: The master seed of the run.
        *path: Key strings or indices, e.g. ("trial", 7, "noise").

    Returns:
        A seed in [0, 2**64).
    """
    seq = np.random.SeedSequence(
        entropy=master & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(_key_word(p) for p in path),
    )
    words = seq.generate_state(1, dtype=np.uint64)
    return int(words[0])


def counter_uniforms(seed: int, domain: int, counter: int, size: int) -> np.ndarray:
    """
    Draws `size` uniforms in [0, 1) from the Philox stream keyed by
    (seed, domain), with `counter` in the second counter word.

    The output is a pure function of (seed, domain, counter, position).
    Philox advances the lowest counter word, so streams for different
    `counter` values never overlap.
    """
    bit_gen = np.random.Philox(
        key=np.array([seed & 0xFFFFFFFFFFFFFFFF, domain], dtype=np.uint64),
        counter=np.array([0, counter, 0, 0], dtype=np.uint64),
    )
    return np.random.Generator(bit_gen).random(size)
