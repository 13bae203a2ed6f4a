#!/usr/bin/env python3
"""Time the pure-Python and compiled transform kernels on shared workloads.

Two workloads run under every available backend:

  micro     repeated two-mode transforms on a fixed many-term state,
            isolating the kernel inner loop
  scenario  a full interference scan through the public API, showing
            what the kernel choice is worth end to end

Each timing is the best of --repeats wall-clock runs.
"""

import argparse
import time

from qrelay import kernels
from qrelay.fock import ModeKey, ModeRegistry, apply_creation, mode_transform, vacuum
from qrelay.optics import beamsplitter_matrix
from qrelay.scenarios import build_ideal_config, phase_grid, run_teleport_scan

CHANNELS = ("w", "x", "y", "z")


def spread_state():
    """One photon per channel, fanned out over all bins and channels."""
    reg = ModeRegistry(max_bins=4)
    for name in CHANNELS:
        reg.add_channel(name, internals=(0, 1))
    state = vacuum(reg, n_max=4)
    for name in CHANNELS:
        state = apply_creation(state, ModeKey(name, 0, 0))
    bs = beamsplitter_matrix()
    for name in CHANNELS:
        for t in range(3):
            state = mode_transform(state, (ModeKey(name, t, 0), ModeKey(name, t + 1, 0)), bs)
    for a, b in zip(CHANNELS, CHANNELS[1:]):
        for t in range(4):
            state = mode_transform(state, (ModeKey(a, t, 0), ModeKey(b, t, 0)), bs)
    return state


def micro_pairs():
    pairs = []
    for a, b in zip(CHANNELS, CHANNELS[1:]):
        for t in range(4):
            pairs.append((ModeKey(a, t, 0), ModeKey(b, t, 0)))
    return pairs


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iterations", type=int, default=20,
                        help="micro-workload sweeps per timing run")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing runs per backend, best one reported")
    args = parser.parse_args()

    state = spread_state()
    pairs = micro_pairs()
    bs = beamsplitter_matrix()
    cfg = build_ideal_config()
    phases = phase_grid(8, 1.0)

    def micro():
        for _ in range(args.iterations):
            for a, b in pairs:
                mode_transform(state, (a, b), bs)

    def scenario():
        run_teleport_scan(cfg, phases)

    print(f"micro state: {len(state)} terms, {len(state.registry)} modes, "
          f"{len(pairs)} transforms per sweep, {args.iterations} sweeps")
    print(f"scenario: ideal teleport scan, {len(phases)} phases")
    print()

    original = kernels.backend_name()
    results = {}
    try:
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            micro()  # warm up allocators and caches
            results[backend] = (
                best_of(micro, args.repeats),
                best_of(scenario, args.repeats),
            )
    finally:
        kernels.set_backend(original)

    sweeps = args.iterations * len(pairs)
    print(f"{'backend':<10} {'micro us/transform':>20} {'scenario s':>12}")
    for backend, (t_micro, t_scan) in results.items():
        print(f"{backend:<10} {t_micro / sweeps * 1e6:>20.2f} {t_scan:>12.4f}")
    if len(results) == 2:
        py = results["python"]
        cc = results["compiled"]
        print(f"{'speedup':<10} {py[0] / cc[0]:>19.2f}x {py[1] / cc[1]:>11.2f}x")
    else:
        print("only one backend available, no comparison")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
