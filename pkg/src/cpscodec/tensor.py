"""Rank-4 float32 tensor type with payload-byte accounting.

Activations are (n, c, h, w) row-major float32 arrays, immutable once
frozen. Every live tensor's payload bytes are tracked in a process-global
registry so the tiled-vs-full memory claims can be asserted, not guessed.
Parameter arrays (weights/biases) are plain ndarrays and are not counted:
the accounting targets feature-map growth.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

#: allocation domains; "image" covers per-tile/image-scale activations,
#: "latent" covers the assembled latent-resolution planes.
DOMAINS = ("image", "latent")


@dataclass(frozen=True)
class AllocStats:
    live_bytes: int
    peak_bytes: int


class _Registry:
    """Process-global atomic aggregate of live tensor payload bytes."""

    def __init__(self):
        self._lock = threading.Lock()
        self._live = dict.fromkeys(DOMAINS, 0)
        self._peak = dict.fromkeys(DOMAINS, 0)

    def register(self, nbytes: int, domain: str) -> None:
        with self._lock:
            self._live[domain] += nbytes
            if self._live[domain] > self._peak[domain]:
                self._peak[domain] = self._live[domain]

    def release(self, nbytes: int, domain: str) -> None:
        with self._lock:
            self._live[domain] -= nbytes

    def stats(self, domain: str | None = None) -> AllocStats:
        with self._lock:
            if domain is None:
                return AllocStats(sum(self._live.values()),
                                  sum(self._peak.values()))
            return AllocStats(self._live[domain], self._peak[domain])

    def reset_peak(self) -> None:
        with self._lock:
            for d in DOMAINS:
                self._peak[d] = self._live[d]


_registry = _Registry()


def alloc_stats(domain: str | None = None) -> AllocStats:
    """Current live/peak payload bytes, overall or for one domain.

    Note: the overall peak is the sum of per-domain peaks, an upper bound
    on the true simultaneous peak; it is exact when one domain dominates.
    """
    if domain is not None and domain not in DOMAINS:
        raise ContractViolation(f"unknown domain {domain!r}")
    return _registry.stats(domain)


def reset_peak() -> None:
    _registry.reset_peak()


class Tensor:
    """Immutable (n, c, h, w) float32 array with tracked payload bytes."""

    __slots__ = ("data", "domain", "__weakref__")

    def __init__(self, data: np.ndarray, domain: str = "image",
                 writable: bool = False):
        if domain not in DOMAINS:
            raise ContractViolation(f"unknown domain {domain!r}")
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 4 or min(data.shape) < 1:
            raise ContractViolation(
                f"tensor must be rank-4 with positive dims, got {data.shape}")
        if not writable:
            data.flags.writeable = False
        self.data = data
        self.domain = domain
        _registry.register(data.nbytes, domain)
        weakref.finalize(self, _registry.release, data.nbytes, domain)

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, n, c, h, w, domain="image", writable=False):
        return cls(np.zeros((n, c, h, w), dtype=np.float32), domain,
                   writable=writable)

    @classmethod
    def from_array(cls, arr, domain="image"):
        return cls(np.asarray(arr, dtype=np.float32), domain)

    # -- views ------------------------------------------------------------

    @property
    def dims(self):
        return self.data.shape

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def c(self):
        return self.data.shape[1]

    @property
    def h(self):
        return self.data.shape[2]

    @property
    def w(self):
        return self.data.shape[3]

    @property
    def nbytes(self):
        return self.data.nbytes

    def freeze(self) -> "Tensor":
        self.data.flags.writeable = False
        return self

    def __repr__(self):
        return f"Tensor{self.dims}[{self.domain}]"
