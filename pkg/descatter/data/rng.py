import numpy as np

from descatter.errors import ConfigError


def derive_rng(master_seed: int, index: int) -> np.random.Generator:
    """
    Independent stream number `index` under `master_seed`. Streams come from
    SeedSequence spawn keys, so they do not depend on the order they are requested in.
    """
    if index < 0 or master_seed < 0:
        raise ConfigError(
            "derive_rng needs non-negative seeds and indices.",
            extensions={"master_seed": master_seed, "index": index},
        )
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


__all__ = ["derive_rng"]
