"""Linear-optical circuit elements on registered modes.

Everything reduces to mode_transform calls: a beamsplitter is a 2x2 unitary
on a mode pair, a phase shift a 1x1 phase, a loss a beamsplitter against a
registered sink mode, and a bin delay a relabeling of time bins within one
spatial channel.  An unbalanced Michelson interferometer is built from two
passes through a 50/50 coupler with a one-bin delay and a phase in between,
which keeps it exactly unitary including its non-detected output port.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import BinOverflowError, ConfigError
from .fock import FockState, ModeKey, ModeRegistry, mode_transform


def loss_from_db(db: float) -> float:
    """Power transmittance for a fiber attenuation given in dB."""
    if db < 0:
        raise ConfigError(f"attenuation must be >= 0 dB, got {db}")
    return 10.0 ** (-db / 10.0)


def beamsplitter_matrix(transmittance: float = 0.5, phase: float = 0.0) -> np.ndarray:
    """[[sqrt(t), i sqrt(1-t)], [i sqrt(1-t), sqrt(t)]] with phase on arm b."""
    if not 0.0 <= transmittance <= 1.0:
        raise ConfigError(f"transmittance must be in [0, 1], got {transmittance}")
    t = math.sqrt(transmittance)
    r = 1j * math.sqrt(1.0 - transmittance)
    ph = np.exp(1j * phase)
    return np.array([[t, r * ph], [r, t * ph]], dtype=complex)


@dataclass(frozen=True)
class BeamSplitter:
    mode_a: ModeKey
    mode_b: ModeKey
    transmittance: float = 0.5
    phase: float = 0.0


@dataclass(frozen=True)
class PhaseShift:
    mode: ModeKey
    phase: float


@dataclass(frozen=True)
class Loss:
    """Partial transmission of one mode; the lost part goes to `sink`."""

    mode: ModeKey
    transmittance: float
    sink: ModeKey


@dataclass(frozen=True)
class BinDelay:
    """Shift every time bin of one spatial channel by `shift` bins."""

    spatial: str
    shift: int = 1


Element = Union[BeamSplitter, PhaseShift, Loss, BinDelay]


@dataclass
class Circuit:
    registry: ModeRegistry
    elements: List[Element] = field(default_factory=list)

    def add_beamsplitter(self, mode_a, mode_b, transmittance=0.5, phase=0.0):
        self.registry.index(mode_a)
        self.registry.index(mode_b)
        self.elements.append(BeamSplitter(mode_a, mode_b, transmittance, phase))

    def add_phase(self, mode: ModeKey, phase: float):
        self.registry.index(mode)
        self.elements.append(PhaseShift(mode, phase))

    def add_loss(self, mode: ModeKey, transmittance: float, sink_spatial: str):
        sink = ModeKey(sink_spatial, mode.time_bin, mode.internal)
        self.registry.add(sink)
        self.elements.append(Loss(mode, transmittance, sink))

    def add_channel_loss(self, spatial: str, transmittance: float, sink_spatial: Optional[str] = None):
        """Same transmittance on every (bin, internal) mode of a channel."""
        if transmittance == 1.0:
            return
        sink_spatial = sink_spatial or f"{spatial}-loss"
        for idx in self.registry.indices_for(spatial):
            mode = self.registry.key_at(idx)
            self.add_loss(mode, transmittance, sink_spatial)

    def add_michelson(self, spatial: str, phase: float, internals: Sequence[int] = (0,),
                      loss_spatial: Optional[str] = None) -> str:
        """Unbalanced Michelson on a channel: bin t -> {t, t+1} plus a loss port.

        Output port map (single photon in bin t):
            a(s,t) -> 1/2 a(s,t) + 1/2 e^{i phase} a(s,t+1) + loss-port terms
        so P(bin t) = P(bin t+1) = 1/4 and P(lost) = 1/2.  Occupied modes in
        the last registered bin of the loss channel would overflow; callers
        must leave one bin of headroom.
        """
        ls = loss_spatial or f"{spatial}-mich-loss"
        reg = self.registry
        reg.add_channel(ls, internals=internals)
        pairs = [
            (ModeKey(spatial, t, i), ModeKey(ls, t, i))
            for t in range(reg.max_bins)
            for i in internals
        ]
        for a, b in pairs:
            self.add_beamsplitter(a, b)
        self.elements.append(BinDelay(ls, 1))
        # the +pi makes the output-port relative amplitude exactly e^{i phase}
        for t in range(reg.max_bins):
            for i in internals:
                self.add_phase(ModeKey(ls, t, i), phase + math.pi)
        for a, b in pairs:
            self.add_beamsplitter(a, b)
        return ls

    def add_bin_encoder(self, spatial: str, phase: float, internals: Sequence[int] = (0,)):
        """Lossless two-bin superposition: a(s,0) -> (a(s,0) + e^{i phase} a(s,1))/sqrt(2).

        This is the idealized, unit-efficiency stand-in for a Michelson qubit
        encoder; used by the perfect-components scenario.
        """
        u = np.array(
            [[1.0, np.exp(1j * phase)], [1.0, -np.exp(1j * phase)]], dtype=complex
        ) / math.sqrt(2.0)
        for i in internals:
            self.elements.append(
                _RawUnitary((ModeKey(spatial, 0, i), ModeKey(spatial, 1, i)), u)
            )


@dataclass(frozen=True)
class _RawUnitary:
    """Internal element: an explicit unitary on a mode tuple."""

    modes: tuple
    matrix: np.ndarray


def _apply_bin_delay(state: FockState, element: BinDelay) -> FockState:
    reg = state.registry
    src = reg.indices_for(element.spatial)
    remap = {}
    for idx in src:
        key = reg.key_at(idx)
        tgt = ModeKey(key.spatial, key.time_bin + element.shift, key.internal)
        remap[idx] = reg.index(tgt) if tgt in reg else -1
    out = {}
    for occ, amp in state.terms.items():
        new = bytearray(occ)
        for idx in src:
            new[idx] = 0
        for idx in src:
            n = occ[idx]
            if n == 0:
                continue
            tgt = remap[idx]
            if tgt < 0:
                raise BinOverflowError(
                    f"delay pushes occupied mode {reg.key_at(idx)} past max_bins"
                )
            new[tgt] += n
        key = bytes(new)
        out[key] = out.get(key, 0.0) + amp
    return FockState(reg, state.n_max, out)


def apply(circuit: Circuit, state: FockState) -> FockState:
    """Run a state through every element of the circuit, in order."""
    if state.registry is not circuit.registry:
        state = FockState(circuit.registry, state.n_max, state.terms)
    for el in circuit.elements:
        if isinstance(el, BeamSplitter):
            m = beamsplitter_matrix(el.transmittance, el.phase)
            state = mode_transform(state, [el.mode_a, el.mode_b], m)
        elif isinstance(el, PhaseShift):
            state = mode_transform(
                state, [el.mode], np.array([[np.exp(1j * el.phase)]])
            )
        elif isinstance(el, Loss):
            t = math.sqrt(el.transmittance)
            r = math.sqrt(1.0 - el.transmittance)
            m = np.array([[t, r], [-r, t]], dtype=complex)
            state = mode_transform(state, [el.mode, el.sink], m)
        elif isinstance(el, BinDelay):
            state = _apply_bin_delay(state, el)
        elif isinstance(el, _RawUnitary):
            state = mode_transform(state, list(el.modes), el.matrix)
        else:
            raise TypeError(f"unknown circuit element {el!r}")
    return state
