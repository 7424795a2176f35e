#!/usr/bin/env python3
"""Measure memory-read (bcg) vs recompute (lb) editing cost.

Runs the same edit script in both modes, prints counters and wall times,
and checks the counter identity gain == 1 + forward_cost/omega.
"""

import argparse
import time

import numpy as np

from maskedit import DenoiserConfig, SessionConfig
from maskedit.denoiser import make_denoiser
from maskedit.guidance import (
    MODE_BCG,
    MODE_LB,
    run_background_denoise,
    run_edit_denoise,
)
from maskedit.masks import rasterize_rect
from maskedit.memory import LayerMemory


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--edits", type=int, default=3)
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--size", type=int, default=48, help="Latent grid side.")
    parser.add_argument("--steps", type=int, default=20)
    parser.add_argument("--backend", default="procedural",
                        choices=("procedural", "toy-dit"))
    parser.add_argument("--seed", type=int, default=0)
    return parser.parse_args()


def run_mode(mode, args, config):
    walls = []
    omega = forward = 0
    for run in range(args.runs):
        backend = make_denoiser(config.backend, config.channels, config.denoiser)
        memory = LayerMemory()
        record, _ = run_background_denoise(
            "a plain backdrop", backend, config.denoiser, config.channels,
            args.size, args.size, args.seed + run,
        )
        memory.append(record)
        started = time.perf_counter()
        for e in range(args.edits):
            side = args.size // 2
            offset = (e * 5) % (args.size - side)
            mask = rasterize_rect(
                offset, offset, offset + side - 1, offset + side - 1,
                args.size, args.size,
            )
            rec, rep = run_edit_denoise(
                memory, f"object {e}", mask, backend, config.denoiser,
                args.seed + run, mode=mode,
            )
            memory.append(rec)
            omega += rep.omega
            forward += rep.forward_cost
        walls.append((time.perf_counter() - started) * 1000.0)
    return omega, forward, walls


def main():
    args = parse_args()
    config = SessionConfig(
        latent_height=args.size,
        latent_width=args.size,
        backend=args.backend,
        seed=args.seed,
        denoiser=DenoiserConfig(num_steps=args.steps),
    )
    print(f"{'mode':<6} {'omega':>8} {'forward':>8} {'gain':>8} "
          f"{'wall_ms mean':>13} {'wall_ms std':>12}")
    results = {}
    for mode in (MODE_BCG, MODE_LB):
        omega, forward, walls = run_mode(mode, args, config)
        gain = (omega + forward) / omega
        results[mode] = np.mean(walls)
        print(f"{mode:<6} {omega:>8} {forward:>8} {gain:>8.4f} "
              f"{np.mean(walls):>13.2f} {np.std(walls):>12.2f}")
    speedup = results[MODE_LB] / results[MODE_BCG]
    print(f"\nmeasured wall-clock ratio lb/bcg over {args.runs} runs: {speedup:.3f}")


if __name__ == "__main__":
    main()
