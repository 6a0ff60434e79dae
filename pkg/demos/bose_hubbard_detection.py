"""Detect the superfluid-Mott transition of the Bose-Hubbard chain.

Same protocol as the spin-chain demo, opposite sweep direction: at unit
filling the chain is superfluid for small U/J and a Mott insulator
above U/J ~ 3.4 (a BKT point in 1D).  The detector trains on the
superfluid side and scores the full sweep; a Kullback-Leibler
divergence of each spectrum from the origin record rides along as the
non-learned baseline column.

Runs in about a minute (61 DMRG ground states at L = 12, n_max = 4).
"""

import os

from esgan.gan import default_train_config
from esgan.pipeline import (
    SweepConfig,
    generate,
    read_dataset,
    scan_cmd,
    train_cmd,
)

L = 12
N_MAX = 4
TRAIN_WIN = (0.0, 2.5)
VAL_WIN = (2.5, 3.0)
SEED = 0
OUT_DIR = "demo_output"
DATASET = os.path.join(OUT_DIR, f"bh_L{L}_sweep.ds")


def main():
    os.makedirs(OUT_DIR, exist_ok=True)

    if os.path.exists(DATASET):
        ds = read_dataset(DATASET)
        print(f"reusing {DATASET} ({len(ds.records)} records)")
    else:
        print(f"sweeping U/J in [0, 6] at step 0.1 (L = {L}) ...")
        cfg = SweepConfig(
            model_id="bh", L=L, control_min=0.0, control_max=6.0,
            step=0.1, n_max=N_MAX, out_path=DATASET,
        )
        ds, _ = generate(cfg)
        print(f"{len(ds.records)} ground states -> {DATASET}")

    ckpt = os.path.join(OUT_DIR, f"bh_L{L}_detector.json")
    tcfg = default_train_config("bh", seed=SEED, epochs_max=500)
    det, _ = train_cmd(DATASET, TRAIN_WIN, VAL_WIN, cfg=tcfg, out_path=ckpt)
    print(f"final rec loss {det.mean_train_loss:.2e}"
          f" (converged={det.converged})")

    out = os.path.join(OUT_DIR, f"bh_L{L}_scores.csv")
    curve, _ = scan_cmd(ckpt, DATASET, out_path=out, with_kl=True)

    print(f"\n{'U/J':>6s} {'score':>10s} {'pct':>6s} {'KL':>10s}")
    for r in curve.rows[::4]:
        print(f"{r['control_value']:6.2f} {r['anomaly_score']:10.2e}"
              f" {r['score_percent']:5.1f}% {r['kl_value']:10.2e}")
    print(f"\nscore + baseline columns -> {out}")
    print("the score stays small through the training window and rises"
          " past U/J ~ 3-4, where the Mott gap opens")


if __name__ == "__main__":
    main()
