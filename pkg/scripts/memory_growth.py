#!/usr/bin/env python3
"""Track layer-memory footprint across sequential edits.

The memory stores a full latent trajectory per edit, so RAM grows linearly
with edit count; this prints the per-edit footprint and the fitted slope.
"""

import argparse

import numpy as np

from maskedit import DenoiserConfig, EditSession, SessionConfig
from maskedit.masks import rasterize_rect
from maskedit.rng import stream


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--edits", type=int, default=10)
    parser.add_argument("--size", type=int, default=32, help="Latent grid side.")
    parser.add_argument("--steps", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    return parser.parse_args()


def main():
    args = parse_args()
    config = SessionConfig(
        latent_height=args.size,
        latent_width=args.size,
        backend="procedural",
        seed=args.seed,
        denoiser=DenoiserConfig(num_steps=args.steps),
    )
    session = EditSession.create("a gray wall", config=config)
    rng = stream("memory-growth", args.seed)
    footprints = [session.memory.footprint()]
    print(f"{'edit':>5} {'records':>8} {'footprint_bytes':>16}")
    print(f"{0:>5} {len(session.memory):>8} {footprints[0]:>16}")
    for e in range(args.edits):
        side = max(2, args.size // 3)
        y = int(rng.integers(0, args.size - side))
        x = int(rng.integers(0, args.size - side))
        mask = rasterize_rect(x, y, x + side - 1, y + side - 1, args.size, args.size)
        session.add_edit(f"object number {e}", mask)
        footprints.append(session.memory.footprint())
        print(f"{e + 1:>5} {len(session.memory):>8} {footprints[-1]:>16}")
    counts = np.arange(len(footprints), dtype=float)
    slope, intercept = np.polyfit(counts, footprints, 1)
    residual = np.abs(footprints - (slope * counts + intercept)).max()
    print(f"\nfitted slope {slope:,.0f} bytes/record, intercept {intercept:,.0f}")
    print(f"max residual {residual:,.1f} bytes ({100 * residual / slope:.4f}% of slope)")


if __name__ == "__main__":
    main()
