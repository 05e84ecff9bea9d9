"""The command line driver on a tiny configuration.

Writes a small TOML file, then runs generate, train, evaluate and plot
through the same entry point the ``dnnstate`` console script uses.  Every
step also leaves a manifest with seeds, timings and sha256 hashes.
"""

import os
import sys

from dnnstate import cli

CONFIG = """schema_version = 1
name = "demo"

[data]
scenario = "pwc"
mesh_n = 24
sensors = "uniform16"
n_sensors = 16
mode = "H1"
n_snapshots = 400
n_ghost = 50
master_seed = 11

[net]
blocks = 2
width = 20

[train]
lr = 0.03
steps = 10000
schedules = ["expansion", "global"]
"""


def main(out="demo-cli"):
    os.makedirs(out, exist_ok=True)
    cfg = os.path.join(out, "demo.toml")
    with open(cfg, "w") as fh:
        fh.write(CONFIG)
    common = ["--config", cfg, "--out", out]
    for command in ("generate", "train", "evaluate"):
        code = cli.main([command, *common])
        if code:
            sys.exit(code)
    cli.main(["plot", os.path.join(out, "loss-expansion.csv"), os.path.join(out, "loss-global.csv"),
              "--out", os.path.join(out, "loss.svg"), "--title", "demo"])
    with open(os.path.join(out, "errors.csv")) as fh:
        print(fh.read())


if __name__ == "__main__":
    main()
