"""A miniature fixed-m vs adaptive sweep, driven through the CLI entry point.

Writes one output directory per setting plus summary.csv with the best
observed MMD per setting, then prints the summary table and the r/m
trajectory of the adaptive run. A full-size version of this grid lives
in configs/ring2d_sweep.cfg.
"""

import tempfile
from pathlib import Path

from abcas.cli import main

CFG = """
dataset = ring2d
dataset_size = 512
steps = 400
batch_size = 8
eval_every = 100
eval_samples = 128
latent_dim = 4
g_hidden = 16,16
d_hidden = 16,16
seed = 1
sweep_fixed_m = 0.7,0.9,1.0
sweep_abcas_beta = 4
"""

with tempfile.TemporaryDirectory() as tmp:
    cfg = Path(tmp) / "mini.cfg"
    cfg.write_text(CFG)
    out = Path(tmp) / "sweep"
    code = main(["sweep", "--config", str(cfg), "--out", str(out)])
    print(f"\nsweep exit code: {code}\n")
    print((out / "summary.csv").read_text())

    main(["traj", str(out / "abcas_beta4")])
    lines = (out / "abcas_beta4" / "r_traj.csv").read_text().strip().splitlines()
    print("adaptive run r/m trajectory (every 50th step):")
    for line in lines[::50]:
        print(" ", line)
