import zlib
import numpy as np


def _key_to_int(key):
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)) and key >= 0:
        return int(key)
    return zlib.crc32(repr(key).encode('utf-8'))


def derive_seed(seed, *keys):
    r"""Derive a 32-bit sub-seed from the global seed and a sequence of keys
    (stage names, appliance ids, epsilon values, cell seeds). The same
    (seed, keys) always yields the same sub-seed, and different key tuples
    yield independent streams, so adding experiment cells never perturbs
    the randomness of existing ones."""
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def make_rng(seed, *keys):
    r"""Return a numpy Generator seeded with `derive_seed(seed, *keys)`."""
    return np.random.default_rng(derive_seed(seed, *keys))
