#!/usr/bin/env python3
"""Train the synthetic face cascade and measure detection rate and false
positives per frame on held-out frames, per stage-depth configuration.
"""

import argparse
import time

from fatiguedet.detector import detect
from fatiguedet.synth import SyntheticSpec, generate, train_face_cascade


def run(stage_rounds, n_train, n_test, seed, feature_step):
    t0 = time.time()
    cascade = train_face_cascade(n_frames=n_train, seed=seed,
                                 stage_rounds=stage_rounds,
                                 feature_step=feature_step)
    train_s = time.time() - t0
    held_out = generate(SyntheticSpec(n_frames=n_test,
                                      fraction_fatigued=0.5,
                                      seed=seed + 900))
    t1 = time.time()
    detections = false_positives = 0
    for rec in held_out:
        boxes = detect(rec.image, cascade)
        matched = [b for b in boxes if b.rect.iou(rec.box) >= 0.4]
        detections += bool(matched)
        false_positives += len(boxes) - len(matched)
    eval_s = time.time() - t1
    print(f"stages {list(stage_rounds)!s:<10} train {train_s:6.1f}s  "
          f"eval {eval_s:5.1f}s  detection {detections}/{n_test}  "
          f"fp/frame {false_positives / n_test:.2f}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-train", type=int, default=120)
    parser.add_argument("--n-test", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--feature-step", type=int, default=2)
    parser.add_argument("--stage-rounds", default="4,10",
                        help="semicolon-separated configs, e.g. '3,8;4,10'")
    args = parser.parse_args()
    for config in args.stage_rounds.split(";"):
        rounds = tuple(int(v) for v in config.split(","))
        run(rounds, args.n_train, args.n_test, args.seed,
            args.feature_step)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
