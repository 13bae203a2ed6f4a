"""Threshold detection, Bell-state acceptance, and the trigger timing budget.

Detectors are threshold devices: efficiency eta is applied analytically as
P(no click | n photons) = (1 - eta)^n, which is identical to folding a loss
of transmittance eta into the mode and thresholding with a perfect detector.
Dark counts are independent Bernoulli events OR'd into every open gate.

The measurement station pairs a free-running detector with one that is
armed only for the bin right after the free-running detector fired; that
asymmetry halves the accepted time orderings and is switchable.  Acceptance
of a projection onto the antisymmetric Bell state requires exactly two
clicks, on different detectors, in adjacent time bins inside the clock
window.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from scipy.constants import c as _SPEED_OF_LIGHT

from .errors import ConfigError, UnnormalizedStateError
from .fock import FockState, occupation_distribution

# a click pattern maps (detector label, time bin) -> clicked; absent = no click
ClickPattern = FrozenSet[Tuple[str, int]]

Ensemble = Sequence[Tuple[float, FockState]]


@dataclass(frozen=True)
class DetectorModel:
    label: str
    efficiency: float = 1.0
    dark_prob: float = 0.0
    gated: bool = False

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_prob < 1.0:
            raise ConfigError(f"dark_prob must be in [0, 1), got {self.dark_prob}")

    def click_prob(self, n_photons: int) -> float:
        miss = (1.0 - self.efficiency) ** n_photons
        return 1.0 - (1.0 - self.dark_prob) * miss


@dataclass(frozen=True)
class DetectorChannel:
    """One detector watching one spatial channel.

    follows: label of the detector whose click at bin t arms this one at
    bin t+1; None means free-running (all bins open).
    """

    model: DetectorModel
    spatial: str
    follows: Optional[str] = None


@dataclass
class DetectionLayout:
    channels: List[DetectorChannel]

    def __post_init__(self):
        labels = [ch.model.label for ch in self.channels]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate detector labels: {labels}")
        for ch in self.channels:
            if ch.follows is not None and ch.follows not in labels:
                raise ConfigError(f"{ch.model.label} follows unknown {ch.follows}")


def _check_ensemble(ensemble: Ensemble) -> None:
    total = sum(w for w, _ in ensemble)
    if abs(total - 1.0) > 1e-9:
        raise UnnormalizedStateError(f"ensemble weights sum to {total}, not 1")


def _gate_counts(state: FockState, occ, spatial: str) -> List[int]:
    """Photons per time bin on one channel, summed over internal labels."""
    reg = state.registry
    counts = [0] * reg.max_bins
    for idx in reg.indices_for(spatial):
        counts[reg.key_at(idx).time_bin] += occ[idx]
    return counts


def _subset_probs(gates: List[Tuple[str, int, float]]):
    """All (clicked-set, probability) pairs for independent gates.

    Zero-probability options are skipped, so the expansion stays small when
    dark counts are off.
    """
    options = []
    for label, t, pc in gates:
        opts = []
        if pc > 0.0:
            opts.append(((label, t), pc))
        if pc < 1.0:
            opts.append((None, 1.0 - pc))
        options.append(opts)
    for combo in itertools.product(*options):
        clicked = frozenset(g for g, _ in combo if g is not None)
        prob = 1.0
        for _, q in combo:
            prob *= q
        yield clicked, prob


def click_distribution(ensemble: Ensemble, layout: DetectionLayout) -> Dict[ClickPattern, float]:
    """Full distribution over click patterns for a weighted state ensemble."""
    _check_ensemble(ensemble)
    free = [ch for ch in layout.channels if ch.follows is None]
    followers = [ch for ch in layout.channels if ch.follows is not None]
    out: Dict[ClickPattern, float] = {}
    for weight, state in ensemble:
        if weight == 0.0:
            continue
        n_bins = state.registry.max_bins
        for occ, p_occ in occupation_distribution(state).items():
            free_gates = []
            counts = {}
            for ch in free + followers:
                counts[ch.model.label] = _gate_counts(state, occ, ch.spatial)
            for ch in free:
                for t in range(n_bins):
                    free_gates.append(
                        (ch.model.label, t, ch.model.click_prob(counts[ch.model.label][t]))
                    )
            for free_clicks, p_free in _subset_probs(free_gates):
                armed = []
                for ch in followers:
                    for (label, t) in free_clicks:
                        if label == ch.follows and t + 1 < n_bins:
                            armed.append(
                                (
                                    ch.model.label,
                                    t + 1,
                                    ch.model.click_prob(counts[ch.model.label][t + 1]),
                                )
                            )
                for sub_clicks, p_sub in _subset_probs(armed):
                    pattern = free_clicks | sub_clicks
                    out[pattern] = out.get(pattern, 0.0) + weight * p_occ * p_free * p_sub
    return out


def psi_minus_filter(
    pattern: ClickPattern,
    labels: Tuple[str, str] = ("bsa-ge", "bsa-ingaas"),
    window: Sequence[int] = (0, 1, 2),
) -> bool:
    """Exactly two clicks, different detectors, adjacent bins, inside the window."""
    clicks = [(lab, t) for lab, t in pattern if lab in labels]
    if len(clicks) != 2:
        return False
    (la, ta), (lb, tb) = clicks
    if la == lb:
        return False
    return abs(ta - tb) == 1 and ta in window and tb in window


def herald_filter(
    pattern: ClickPattern,
    label: str = "herald",
    time_bin: int = 0,
    enabled: bool = True,
) -> bool:
    if not enabled:
        return True
    return (label, time_bin) in pattern


@dataclass(frozen=True)
class TeleportOutcome:
    """Joint acceptance probabilities for one scan point."""

    accept: float                 # P(Bell acceptance and herald)
    bob: Dict[int, float]         # bin -> P(acceptance and herald and Bob click there)


def teleport_outcome_distribution(
    ensemble: Ensemble,
    ge: DetectorChannel,
    ingaas: DetectorChannel,
    bob: DetectorChannel,
    herald: Optional[DetectorChannel] = None,
    symmetric_bsa: bool = False,
    window: Sequence[int] = (0, 1, 2),
    herald_bin: int = 0,
    bob_bins: Sequence[int] = (0, 1, 2),
) -> TeleportOutcome:
    """P(accepted Bell pattern [and herald] [and Bob click at bin b]).

    Direct enumeration of the accepted patterns only; much cheaper than
    click_distribution when dark counts open up the full pattern space.
    Accepted patterns with the free-running detector at bin t and its
    partner at t+1 always count; the reversed ordering needs symmetric_bsa.
    """
    _check_ensemble(ensemble)
    accept_total = 0.0
    bob_total = {b: 0.0 for b in bob_bins}
    for weight, state in ensemble:
        if weight == 0.0:
            continue
        n_bins = state.registry.max_bins
        pairs: List[Tuple[int, int]] = []
        for t in window:
            if t + 1 < n_bins and (t + 1) in window:
                pairs.append((t, t + 1))
        for occ, p_occ in occupation_distribution(state).items():
            n_ge = _gate_counts(state, occ, ge.spatial)
            n_in = _gate_counts(state, occ, ingaas.spatial)
            pc_ge = [ge.model.click_prob(n) for n in n_ge]
            pc_in = [ingaas.model.click_prob(n) for n in n_in]

            def only_at(probs, t):
                prob = probs[t]
                for u, q in enumerate(probs):
                    if u != t:
                        prob *= 1.0 - q
                return prob

            p_accept = 0.0
            for t, t1 in pairs:
                if symmetric_bsa:
                    # both detectors free-running: exactly one click on each,
                    # either time ordering
                    p_accept += only_at(pc_ge, t) * only_at(pc_in, t1)
                    p_accept += only_at(pc_in, t) * only_at(pc_ge, t1)
                else:
                    # free-running detector fires at t alone; its partner is
                    # armed only at t+1, so no other partner gates exist
                    p_accept += only_at(pc_ge, t) * pc_in[t1]
            if p_accept == 0.0:
                continue
            h = 1.0
            if herald is not None:
                n_h = _gate_counts(state, occ, herald.spatial)
                h = herald.model.click_prob(n_h[herald_bin])
                if h == 0.0:
                    continue
            n_b = _gate_counts(state, occ, bob.spatial)
            base = weight * p_occ * p_accept * h
            accept_total += base
            for b in bob_bins:
                bob_total[b] += base * bob.model.click_prob(n_b[b])
    return TeleportOutcome(accept_total, bob_total)


def coincidence_probability(
    ensemble: Ensemble,
    det_a: DetectorChannel,
    det_b: DetectorChannel,
    bins: Optional[Sequence[int]] = None,
) -> float:
    """Same-bin two-detector coincidence probability, summed over bins.

    Marginal per gate; extra clicks elsewhere are not vetoed, as in a plain
    coincidence counter.
    """
    _check_ensemble(ensemble)
    total = 0.0
    for weight, state in ensemble:
        if weight == 0.0:
            continue
        use_bins = range(state.registry.max_bins) if bins is None else bins
        for occ, p_occ in occupation_distribution(state).items():
            n_a = _gate_counts(state, occ, det_a.spatial)
            n_b = _gate_counts(state, occ, det_b.spatial)
            for t in use_bins:
                total += (
                    weight
                    * p_occ
                    * det_a.model.click_prob(n_a[t])
                    * det_b.model.click_prob(n_b[t])
                )
    return total


@dataclass(frozen=True)
class TimingBudget:
    """Fiber lengths and electronics latency that set Bob's gate margin.

    The sender-side spool delays only the arrival synchronization at the
    measurement station, not Bob's gate, so it stays out of the slack.
    """

    alice_spool_m: float = 177.0
    charlie_spool_m: float = 179.72
    quantum_fiber_m: float = 800.0
    classical_fiber_m: float = 800.0
    bob_spool_m: float = 250.0
    group_index: float = 1.468
    decision_latency_s: float = 220e-9

    def __post_init__(self):
        for name in (
            "alice_spool_m",
            "charlie_spool_m",
            "quantum_fiber_m",
            "classical_fiber_m",
            "bob_spool_m",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


def validate_timing(budget: TimingBudget) -> float:
    """Photon arrival at Bob minus classical-trigger arrival, in seconds.

    Positive slack means the trigger information reaches Bob's gate before
    his photon does.  The photon rides quantum fiber plus Bob's spool; the
    trigger waits for the delayed pump-side photon, the decision
    electronics, and the classical fiber.
    """
    per_m = budget.group_index / _SPEED_OF_LIGHT
    photon = (budget.quantum_fiber_m + budget.bob_spool_m) * per_m
    classical = (
        budget.charlie_spool_m * per_m
        + budget.decision_latency_s
        + budget.classical_fiber_m * per_m
    )
    return photon - classical
