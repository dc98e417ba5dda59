"""Counter-based random streams addressed by (seed, stage, pulse).

Every random draw in the simulator is tied to the pulse it belongs to. Draws
for pulse ``i`` come from a Philox generator keyed by ``(seed, stage, block)``
with ``block = i // BLOCK_PULSES``, and the whole block is always generated
before slicing. Any partition of a pulse range into sub-ranges, processed in
any order or in parallel, therefore reproduces the serial result bit for bit.
"""

from __future__ import annotations

import numpy as np

BLOCK_PULSES = 1 << 18

_STAGES = {
    "emit": 1,
    "propagate": 2,
    "route": 3,
    "detect": 4,
    "dark": 5,
    "coprop": 6,
    "alice": 7,
    "receiver": 8,
}


def stage_rng(seed: int, stage: str, block: int, sub: int = 0) -> np.random.Generator:
    """Philox generator for one (stage, block, sub-stream) cell."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_STAGES[stage], int(block), int(sub)))
    return np.random.Generator(np.random.Philox(ss))


def block_range(start: int, stop: int) -> range:
    """Block indices touching pulses ``[start, stop)``."""
    if stop <= start:
        return range(0)
    return range(start // BLOCK_PULSES, (stop - 1) // BLOCK_PULSES + 1)


def pulse_uniforms(seed: int, stage: str, start: int, stop: int, shape: tuple[int, ...] = ()) -> np.ndarray:
    """Uniform draws of ``shape`` per pulse, shape ``(stop - start, *shape)``."""
    return _pulse_draws(seed, stage, start, stop, shape, normal=False)


def pulse_normals(seed: int, stage: str, start: int, stop: int, shape: tuple[int, ...] = ()) -> np.ndarray:
    """Standard-normal draws of ``shape`` per pulse."""
    return _pulse_draws(seed, stage, start, stop, shape, normal=True)


def _pulse_draws(seed, stage, start, stop, shape, normal):
    out = np.empty((max(stop - start, 0), *shape))
    for b in block_range(start, stop):
        rng = stage_rng(seed, stage, b)
        size = (BLOCK_PULSES, *shape)
        block = rng.standard_normal(size) if normal else rng.random(size)
        b0 = b * BLOCK_PULSES
        lo, hi = max(start, b0), min(stop, b0 + BLOCK_PULSES)
        out[lo - start:hi - start] = block[lo - b0:hi - b0]
    return out
