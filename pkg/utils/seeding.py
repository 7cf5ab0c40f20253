import zlib

import numpy as np


def derive_seed(master, *keys):
    """Stable child seed of `master` for a path of keys (names, variants, ratios, indices)."""
    words = [zlib.crc32(str(key).encode("utf-8")) for key in keys]
    return int(np.random.SeedSequence([int(master), *words]).generate_state(1)[0])
