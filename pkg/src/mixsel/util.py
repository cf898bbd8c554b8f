"""Shared plumbing: seed derivation, parallel maps, JSON output."""
from __future__ import annotations

import concurrent.futures
import json
from typing import Any, Callable, Iterable, Sequence

import numpy as np


def derive_seed(*parts: int) -> int:
    """Fold a parent seed plus integer tags into a fresh 64-bit seed.

    Deterministic in the inputs, so independent workers can be seeded
    without sharing generator state.
    """
    ss = np.random.SeedSequence(entropy=[int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def parallel_map(fn: Callable[[Any], Any], items: Sequence[Any], threads: int = 1) -> list:
    """Map ``fn`` over ``items``, optionally on a process pool.

    Results are returned in input order, so the reduction is identical
    for any worker count (each item must be seeded independently).
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _render_json(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad_in}{json.dumps(str(k))}: {_render_json(v, indent, level + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj.tolist()) if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            return "[]"
        items = [f"{pad_in}{_render_json(v, indent, level + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            raise ValueError(f"non-finite value in JSON output: {x!r}")
        return f"{x:.17g}"
    return json.dumps(obj)


def dump_json(obj: Any, path: str) -> None:
    """Write JSON with floats at 17 significant digits (round-trip exact)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_render_json(obj, indent=2, level=0))
        fh.write("\n")


def iter_floats(obj: Any) -> Iterable[float]:
    """Yield every float reachable in a nested structure (for finiteness checks)."""
    if isinstance(obj, dict):
        for v in obj.values():
            yield from iter_floats(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            yield from iter_floats(v)
    elif isinstance(obj, np.ndarray):
        for v in np.asarray(obj, dtype=float).ravel():
            yield float(v)
    elif isinstance(obj, (float, np.floating)):
        yield float(obj)
