"""Sparse truncated Fock-space engine.

A mode is identified by (spatial channel, time bin, internal label).  The
internal label tags which member of an orthonormal wavepacket basis the
photon occupies; it is used to model partial distinguishability and is
invisible to detectors.  States are sparse maps from occupation vectors to
complex amplitudes, truncated at a total photon number n_max.

Linear optics acts by substituting creation operators,

    a^dag_j  ->  sum_k U[j, k] a^dag_k,

and re-expanding the resulting polynomial on the occupation basis.  For a
unitary U this preserves the norm exactly (up to float rounding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatchError,
    RegistryMismatchError,
    TruncationOverflowError,
    UnnormalizedStateError,
)

PRUNE_TOL = 1e-15
NORM_ATOL = 1e-9

OccupationVector = Tuple[int, ...]


@dataclass(frozen=True, order=True)
class ModeKey:
    """Identity of one optical mode: (spatial, time_bin, internal)."""

    spatial: str
    time_bin: int
    internal: int = 0


class ModeRegistry:
    """Append-only mapping from ModeKey to a stable dense index."""

    def __init__(self, max_bins: int = 4):
        if max_bins < 1:
            raise ValueError("max_bins must be >= 1")
        self.max_bins = max_bins
        self._keys: List[ModeKey] = []
        self._index: Dict[ModeKey, int] = {}

    def add(self, key: ModeKey) -> int:
        if key in self._index:
            return self._index[key]
        if not 0 <= key.time_bin < self.max_bins:
            raise RegistryMismatchError(
                f"time_bin {key.time_bin} outside [0, {self.max_bins}) for {key}"
            )
        if key.internal not in (0, 1):
            raise RegistryMismatchError(
                f"internal label must be 0 or 1, got {key.internal}"
            )
        idx = len(self._keys)
        self._keys.append(key)
        self._index[key] = idx
        return idx

    def add_channel(self, spatial: str, internals: Sequence[int] = (0,)) -> List[int]:
        """Register every (bin, internal) mode of one spatial channel."""
        return [
            self.add(ModeKey(spatial, t, i))
            for t in range(self.max_bins)
            for i in internals
        ]

    def index(self, key: ModeKey) -> int:
        try:
            return self._index[key]
        except KeyError:
            raise RegistryMismatchError(f"mode {key} is not registered") from None

    def __contains__(self, key: ModeKey) -> bool:
        return key in self._index

    def __len__(self) -> int:
        return len(self._keys)

    def keys(self) -> Tuple[ModeKey, ...]:
        return tuple(self._keys)

    def key_at(self, idx: int) -> ModeKey:
        return self._keys[idx]

    def indices_for(self, spatial: str) -> List[int]:
        return [i for i, k in enumerate(self._keys) if k.spatial == spatial]


def _check_same_registry(a: "FockState", b: "FockState") -> None:
    if a.registry is not b.registry and a.registry.keys() != b.registry.keys():
        raise RegistryMismatchError("states use different mode registries")


class FockState:
    """Sparse ket: dict from occupation bytes to complex amplitude.

    The byte string has one entry per registered mode, in registry order.
    Mutating methods return self to allow chaining; `copy` gives an
    independent state sharing the registry.
    """

    __slots__ = ("registry", "n_max", "terms")

    def __init__(self, registry: ModeRegistry, n_max: int = 4, terms=None):
        self.registry = registry
        self.n_max = n_max
        self.terms: Dict[bytes, complex] = dict(terms) if terms else {}

    def copy(self) -> "FockState":
        return FockState(self.registry, self.n_max, self.terms)

    def norm_sq(self) -> float:
        return sum((a * a.conjugate()).real for a in self.terms.values())

    def normalize(self) -> "FockState":
        n = math.sqrt(self.norm_sq())
        if n == 0.0:
            raise UnnormalizedStateError("cannot normalize the zero vector")
        self.terms = {k: v / n for k, v in self.terms.items()}
        return self

    def prune(self, tol: float = PRUNE_TOL) -> "FockState":
        self.terms = {k: v for k, v in self.terms.items() if abs(v) >= tol}
        return self

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.terms.get(bytes(occupation), 0.0 + 0.0j)

    def occupations(self) -> Iterable[Tuple[OccupationVector, complex]]:
        for k, v in self.terms.items():
            yield tuple(k), v

    def __len__(self) -> int:
        return len(self.terms)


def vacuum(registry: ModeRegistry, n_max: int = 4) -> FockState:
    """The vacuum ket |0...0> with amplitude 1."""
    zero = bytes(len(registry))
    return FockState(registry, n_max, {zero: 1.0 + 0.0j})


def apply_creation(state: FockState, mode: ModeKey) -> FockState:
    """Apply a^dag_mode: occupation n -> n+1 with amplitude factor sqrt(n+1)."""
    idx = state.registry.index(mode)
    out: Dict[bytes, complex] = {}
    for occ, amp in state.terms.items():
        total = sum(occ)
        if total + 1 > state.n_max:
            raise TruncationOverflowError(
                f"creation on {mode} exceeds n_max={state.n_max}"
            )
        n = occ[idx]
        new = bytearray(occ)
        new[idx] = n + 1
        key = bytes(new)
        out[key] = out.get(key, 0.0) + amp * math.sqrt(n + 1)
    return FockState(state.registry, state.n_max, out)


def _general_transform(terms, idxs, u, prune):
    """K-mode substitution via multinomial re-expansion (reference path)."""
    k_modes = len(idxs)
    sqrt_fact = [math.sqrt(math.factorial(n)) for n in range(17)]

    def compositions(n, k):
        if k == 1:
            yield (n,)
            return
        for first in range(n + 1):
            for rest in compositions(n - first, k - 1):
                yield (first,) + rest

    out: Dict[bytes, complex] = {}
    for occ, amp in terms.items():
        ns = [occ[i] for i in idxs]
        # expansion of prod_j (sum_k U[j,k] a_k)^(n_j); options[j] lists
        # (counts over outputs, coefficient) for input mode j
        options = []
        for j, nj in enumerate(ns):
            opts = []
            for comp in compositions(nj, k_modes):
                coeff = math.factorial(nj)
                for m in comp:
                    coeff /= math.factorial(m)
                val = complex(coeff)
                for k, m in enumerate(comp):
                    if m:
                        val *= u[j][k] ** m
                if val != 0.0:
                    opts.append((comp, val))
            options.append(opts)

        base = amp
        for nj in ns:
            base /= sqrt_fact[nj]

        stack = [((0,) * k_modes, base)]
        for opts in options:
            nxt = []
            for acc_counts, acc_val in stack:
                for comp, val in opts:
                    nxt.append(
                        (
                            tuple(a + b for a, b in zip(acc_counts, comp)),
                            acc_val * val,
                        )
                    )
            stack = nxt

        occ_b = bytearray(occ)
        for counts, val in stack:
            for pos, idx in enumerate(idxs):
                occ_b[idx] = counts[pos]
                val *= sqrt_fact[counts[pos]]
            key = bytes(occ_b)
            out[key] = out.get(key, 0.0) + val
    if prune > 0.0:
        out = {k: v for k, v in out.items() if abs(v) >= prune}
    return out


def mode_transform(
    state: FockState,
    modes: Sequence[ModeKey],
    matrix: np.ndarray,
    prune: float = PRUNE_TOL,
) -> FockState:
    """Apply a linear-optical transform on the listed modes.

    matrix[j, k] is the coefficient of output mode k in the substitution of
    input mode j.  Photon number over the listed modes is conserved term by
    term; modes outside the list are untouched.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (len(modes), len(modes)):
        raise DimensionMismatchError(
            f"matrix shape {m.shape} does not match {len(modes)} modes"
        )
    idxs = [state.registry.index(k) for k in modes]
    if len(set(idxs)) != len(idxs):
        raise DimensionMismatchError("duplicate modes in transform list")
    if len(idxs) == 1:
        terms = kernels.scale_mode_transform(state.terms, idxs[0], complex(m[0, 0]), prune)
    elif len(idxs) == 2:
        terms = kernels.two_mode_transform(
            state.terms,
            idxs[0],
            idxs[1],
            complex(m[0, 0]),
            complex(m[0, 1]),
            complex(m[1, 0]),
            complex(m[1, 1]),
            prune,
        )
    else:
        terms = _general_transform(state.terms, idxs, m.tolist(), prune)
    return FockState(state.registry, state.n_max, terms)


def occupation_distribution(state: FockState) -> Dict[OccupationVector, float]:
    """Probabilities over occupation outcomes; input must be normalized."""
    total = state.norm_sq()
    if abs(total - 1.0) > NORM_ATOL:
        raise UnnormalizedStateError(f"state norm^2 = {total}, expected 1")
    return {tuple(k): (v * v.conjugate()).real for k, v in state.terms.items()}


def inner(a: FockState, b: FockState) -> complex:
    """<a|b> on a shared registry."""
    _check_same_registry(a, b)
    if len(a.terms) > len(b.terms):
        return complex(inner(b, a).conjugate())
    s = 0.0 + 0.0j
    for k, va in a.terms.items():
        vb = b.terms.get(k)
        if vb is not None:
            s += va.conjugate() * vb
    return s
