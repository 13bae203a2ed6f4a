import math

import numpy as np
import pytest

from qrelay.detection import (
    DetectionLayout,
    DetectorChannel,
    DetectorModel,
    TimingBudget,
    click_distribution,
    coincidence_probability,
    herald_filter,
    psi_minus_filter,
    teleport_outcome_distribution,
    validate_timing,
)
from qrelay.errors import ConfigError, UnnormalizedStateError
from qrelay.fock import (
    FockState,
    ModeKey,
    ModeRegistry,
    apply_creation,
    vacuum,
)
from qrelay.optics import Circuit, apply


def _registry(*spatials, max_bins=2):
    reg = ModeRegistry(max_bins=max_bins)
    for s in spatials:
        reg.add_channel(s)
    return reg


def _marginal(dist, gate):
    return sum(p for pattern, p in dist.items() if gate in pattern)


def test_unit_efficiency_always_clicks():
    reg = _registry("a")
    st = apply_creation(vacuum(reg), ModeKey("a", 0))
    layout = DetectionLayout([DetectorChannel(DetectorModel("d"), "a")])
    dist = click_distribution([(1.0, st)], layout)
    assert dist == {frozenset({("d", 0)}): 1.0}


def test_vacuum_dark_counts_factorize():
    d = 0.01
    reg = _registry("a", max_bins=4)
    layout = DetectionLayout([DetectorChannel(DetectorModel("d", dark_prob=d), "a")])
    dist = click_distribution([(1.0, vacuum(reg))], layout)
    assert abs(dist[frozenset()] - (1 - d) ** 4) < 1e-12
    assert abs(sum(dist.values()) - 1.0) < 1e-9


def test_click_probability_inclusion_exclusion():
    reg = _registry("a")
    st = apply_creation(vacuum(reg), ModeKey("a", 0))
    det = DetectorModel("d", efficiency=0.1, dark_prob=1e-4)
    layout = DetectionLayout([DetectorChannel(det, "a")])
    dist = click_distribution([(1.0, st)], layout)
    expect = 1.0 - (1.0 - 0.1) * (1.0 - 1e-4)
    assert abs(_marginal(dist, ("d", 0)) - expect) < 1e-12
    assert abs(sum(dist.values()) - 1.0) < 1e-9


def test_thinning_matches_explicit_loss_element():
    # P(no click | n) = (1 - eta)^n must equal a loss of transmittance eta
    # followed by a perfect threshold detector
    eta = 0.37
    reg = _registry("a")
    two = apply_creation(
        apply_creation(vacuum(reg), ModeKey("a", 0)), ModeKey("a", 0)
    ).normalize()
    layout = DetectionLayout([DetectorChannel(DetectorModel("d", efficiency=eta), "a")])
    p_thin = _marginal(click_distribution([(1.0, two)], layout), ("d", 0))

    reg2 = _registry("a")
    circ = Circuit(reg2)
    circ.add_channel_loss("a", eta, "sink")
    two2 = apply_creation(
        apply_creation(vacuum(reg2), ModeKey("a", 0)), ModeKey("a", 0)
    ).normalize()
    lossy = apply(circ, two2)
    ideal = DetectionLayout([DetectorChannel(DetectorModel("d"), "a")])
    p_loss = _marginal(click_distribution([(1.0, lossy)], ideal), ("d", 0))
    assert abs(p_thin - p_loss) < 1e-12
    assert abs(p_thin - (1.0 - (1.0 - eta) ** 2)) < 1e-12


def test_follower_gates_need_an_opener_click():
    reg = _registry("a", "b", max_bins=3)
    layout = DetectionLayout(
        [
            DetectorChannel(DetectorModel("ge"), "a"),
            DetectorChannel(DetectorModel("in", dark_prob=0.2), "b", follows="ge"),
        ]
    )
    # opener never clicks on vacuum, so the follower's dark counts never fire
    dist = click_distribution([(1.0, vacuum(reg))], layout)
    assert dist == {frozenset(): 1.0}


def test_follower_dark_fires_only_after_opener():
    reg = _registry("a", "b", max_bins=3)
    st = apply_creation(vacuum(reg), ModeKey("a", 0))
    layout = DetectionLayout(
        [
            DetectorChannel(DetectorModel("ge"), "a"),
            DetectorChannel(DetectorModel("in", dark_prob=0.25), "b", follows="ge"),
        ]
    )
    dist = click_distribution([(1.0, st)], layout)
    assert abs(dist[frozenset({("ge", 0)})] - 0.75) < 1e-12
    assert abs(dist[frozenset({("ge", 0), ("in", 1)})] - 0.25) < 1e-12


def test_layout_validation():
    with pytest.raises(ConfigError):
        DetectionLayout(
            [
                DetectorChannel(DetectorModel("d"), "a"),
                DetectorChannel(DetectorModel("d"), "b"),
            ]
        )
    with pytest.raises(ConfigError):
        DetectionLayout([DetectorChannel(DetectorModel("d"), "a", follows="ghost")])
    with pytest.raises(ConfigError):
        DetectorModel("d", efficiency=1.5)
    with pytest.raises(ConfigError):
        DetectorModel("d", dark_prob=1.0)


def test_ensemble_weights_must_sum_to_one():
    reg = _registry("a")
    layout = DetectionLayout([DetectorChannel(DetectorModel("d"), "a")])
    with pytest.raises(UnnormalizedStateError):
        click_distribution([(0.5, vacuum(reg))], layout)


def test_psi_minus_filter_rules():
    assert psi_minus_filter(frozenset({("bsa-ge", 0), ("bsa-ingaas", 1)}))
    assert psi_minus_filter(frozenset({("bsa-ingaas", 1), ("bsa-ge", 2)}))
    assert not psi_minus_filter(frozenset({("bsa-ge", 0), ("bsa-ge", 1)}))
    assert not psi_minus_filter(frozenset({("bsa-ge", 0), ("bsa-ingaas", 2)}))
    assert not psi_minus_filter(
        frozenset({("bsa-ge", 0), ("bsa-ingaas", 1), ("bsa-ge", 2)})
    )
    # clicks outside the clock window are not a valid pair
    assert not psi_minus_filter(frozenset({("bsa-ge", 2), ("bsa-ingaas", 3)}))
    # other detectors' clicks are ignored
    assert psi_minus_filter(frozenset({("bsa-ge", 0), ("bsa-ingaas", 1), ("herald", 0)}))


def test_herald_filter():
    assert herald_filter(frozenset({("herald", 0)}))
    assert not herald_filter(frozenset())
    assert herald_filter(frozenset(), enabled=False)


def _bell_state(reg, sign):
    # (a0 c1 + sign a1 c0)/sqrt(2)
    st = vacuum(reg)
    t1 = apply_creation(apply_creation(st, ModeKey("a", 0)), ModeKey("c", 1))
    t2 = apply_creation(apply_creation(st, ModeKey("a", 1)), ModeKey("c", 0))
    terms = dict(t1.terms)
    for occ, amp in t2.terms.items():
        terms[occ] = terms.get(occ, 0.0) + sign * amp
    return FockState(reg, 4, terms).normalize()


def _phi_plus(reg):
    st = vacuum(reg)
    t1 = apply_creation(apply_creation(st, ModeKey("a", 0)), ModeKey("c", 0))
    t2 = apply_creation(apply_creation(st, ModeKey("a", 1)), ModeKey("c", 1))
    terms = dict(t1.terms)
    for occ, amp in t2.terms.items():
        terms[occ] = terms.get(occ, 0.0) + amp
    return FockState(reg, 4, terms).normalize()


def _bsa_circuit(reg):
    circ = Circuit(reg)
    for t in range(reg.max_bins):
        circ.add_beamsplitter(ModeKey("a", t), ModeKey("c", t))
    return circ


def _ideal_bsa_outcome(state, symmetric):
    reg = state.registry
    ge = DetectorChannel(DetectorModel("bsa-ge"), "a")
    ingaas = DetectorChannel(DetectorModel("bsa-ingaas"), "c")
    bob = DetectorChannel(DetectorModel("bob", dark_prob=0.0), "dump")
    return teleport_outcome_distribution(
        [(1.0, state)], ge, ingaas, bob, symmetric_bsa=symmetric
    )


def test_antisymmetric_state_always_accepted():
    reg = _registry("a", "c", "dump", max_bins=4)
    psi = apply(_bsa_circuit(reg), _bell_state(reg, -1.0))
    assert abs(_ideal_bsa_outcome(psi, True).accept - 1.0) < 1e-12
    # the one-way trigger keeps only one of the two time orderings
    assert abs(_ideal_bsa_outcome(psi, False).accept - 0.5) < 1e-12


def test_symmetric_states_never_accepted():
    reg = _registry("a", "c", "dump", max_bins=4)
    for st in (_bell_state(reg, +1.0), _phi_plus(reg)):
        out = apply(_bsa_circuit(reg), st)
        assert _ideal_bsa_outcome(out, True).accept < 1e-12


def test_qubit_against_pair_acceptance_is_one_quarter():
    # time-bin qubit meeting one half of a two-bin entangled pair on a 50/50
    # splitter: the antisymmetric pattern carries exactly 1/4 of the weight,
    # independent of the qubit and pump phases
    from qrelay.sources import emit_pairs_entangled

    for phi_a, phi_p in ((0.0, 0.0), (0.7, 0.0), (1.3, 2.1)):
        reg = ModeRegistry(max_bins=4)
        for s in ("a", "c", "bob"):
            reg.add_channel(s)
        st = emit_pairs_entangled(vacuum(reg), "c", "bob", 1, phase=phi_p)
        occ = {}
        terms = {}
        for o, amp in st.terms.items():
            n = bytearray(o)
            n[reg.index(ModeKey("a", 0))] += 1
            terms[bytes(n)] = terms.get(bytes(n), 0.0) + amp / math.sqrt(2)
            n2 = bytearray(o)
            n2[reg.index(ModeKey("a", 1))] += 1
            terms[bytes(n2)] = terms.get(bytes(n2), 0.0) + amp * np.exp(1j * phi_a) / math.sqrt(2)
        joint = FockState(reg, 4, terms).normalize()
        out = apply(_bsa_circuit(reg), joint)
        ge = DetectorChannel(DetectorModel("bsa-ge"), "a")
        ingaas = DetectorChannel(DetectorModel("bsa-ingaas"), "c")
        bobdet = DetectorChannel(DetectorModel("bob"), "bob")
        res = teleport_outcome_distribution(
            [(1.0, out)], ge, ingaas, bobdet, symmetric_bsa=True
        )
        assert abs(res.accept - 0.25) < 1e-12
        # without an analyzing interferometer Bob's arrival bin carries no
        # phase information: the accepted weight splits evenly over his bins
        assert abs(res.bob[0] - 0.125) < 1e-12
        assert abs(res.bob[1] - 0.125) < 1e-12
        assert abs(res.bob[2]) < 1e-12


def test_dark_only_acceptance_oracle():
    # vacuum, asymmetric trigger, dark d on both detectors:
    # P = sum_t P(ge fires exactly at t) * d, t in {0, 1}
    d = 0.01
    reg = _registry("a", "c", "dump", max_bins=4)
    ge = DetectorChannel(DetectorModel("bsa-ge", dark_prob=d), "a")
    ingaas = DetectorChannel(DetectorModel("bsa-ingaas", dark_prob=d), "c")
    bob = DetectorChannel(DetectorModel("bob"), "dump")
    out = teleport_outcome_distribution([(1.0, vacuum(reg))], ge, ingaas, bob)
    expect = 2.0 * d * (1 - d) ** 3 * d
    assert abs(out.accept - expect) < 1e-15


def test_dark_only_acceptance_is_monotone():
    reg = _registry("a", "c", "dump", max_bins=4)
    bob = DetectorChannel(DetectorModel("bob"), "dump")
    last = -1.0
    for d in (0.0, 1e-4, 1e-3, 1e-2, 0.05):
        ge = DetectorChannel(DetectorModel("bsa-ge", dark_prob=d), "a")
        ingaas = DetectorChannel(DetectorModel("bsa-ingaas", dark_prob=d), "c")
        out = teleport_outcome_distribution([(1.0, vacuum(reg))], ge, ingaas, bob)
        assert out.accept >= last
        last = out.accept


def test_coincidence_probability_independent_gates():
    reg = _registry("a", "c")
    st = apply_creation(apply_creation(vacuum(reg), ModeKey("a", 0)), ModeKey("c", 0))
    da = DetectorChannel(DetectorModel("da", efficiency=0.5), "a")
    db = DetectorChannel(DetectorModel("db", efficiency=0.25), "c")
    assert abs(coincidence_probability([(1.0, st)], da, db) - 0.125) < 1e-12


def test_timing_budget_defaults():
    slack = validate_timing(TimingBudget())
    assert abs(slack - 1.241415460825234e-07) < 1e-12
    assert slack > 0


def test_timing_budget_no_bob_spool_is_late():
    slack = validate_timing(TimingBudget(bob_spool_m=0.0))
    assert abs(slack - (-1.1000386832946945e-06)) < 1e-12
    assert slack < 0


def test_timing_latency_linearity():
    base = validate_timing(TimingBudget())
    no_latency = validate_timing(TimingBudget(decision_latency_s=0.0))
    assert abs(no_latency - base - 220e-9) < 1e-15


def test_timing_budget_rejects_negative_lengths():
    with pytest.raises(ConfigError):
        TimingBudget(bob_spool_m=-1.0)
