"""JSON helpers: complex numbers are stored as [re, im] pairs."""

from __future__ import annotations

import json

import numpy as np

__all__ = ["decode_complex", "encode_complex", "load_json", "dump_json"]


def encode_complex(a) -> list:
    """Nested lists of [re, im] pairs for a complex array (or scalar)."""
    arr = np.asarray(a, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def decode_complex(data) -> np.ndarray:
    """Inverse of :func:`encode_complex`; also accepts plain real nested lists."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        return arr.astype(complex)
    return arr[..., 0] + 1j * arr[..., 1]


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return encode_complex(obj) if np.iscomplexobj(obj) else obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dump_json(obj, path=None, **kwargs) -> str:
    """Serialise ``obj`` (numpy aware); writes to ``path`` when given."""
    text = json.dumps(obj, default=_default, **kwargs)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
