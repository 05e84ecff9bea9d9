"""Global versus blockwise expansion training of the residual network.

Uses small synthetic data (smooth nonlinear map from R^16 to R^8) so the
comparison runs in about a minute.  Both schedules see the same total
number of steps; the loss histories are written to CSV and drawn as one
SVG chart.
"""

import os

import numpy as np

from dnnstate import plotting, resnet, training


def data(n=1000, m=16, k=8, seed=0):
    # the map is fixed; only the sample points depend on the seed
    A = np.random.default_rng(99).normal(size=(k, m)) / np.sqrt(m)
    w = np.random.default_rng(seed).uniform(-1, 1, size=(n, m))
    return w, np.sin(2 * w @ A.T) + 0.2 * (w[:, :k] ** 2)


def main(out="demo-out"):
    os.makedirs(out, exist_ok=True)
    w, c = data()
    w_test, c_test = data(seed=1)
    paths = []
    for schedule in ("global", "expansion"):
        cfg = training.TrainConfig(lr=0.02, width=20, blocks=3, steps=30_000, schedule=schedule, seed=5)
        p, hist = training.train(w, c, cfg)
        mse = training.batch_loss(p, w_test, c_test)
        print(f"{schedule:>9}: {resnet.count_params(p)} parameters, final loss {hist.loss[-1]:.3e}, "
              f"test loss {mse:.3e}, stage boundaries {hist.boundaries}")
        path = os.path.join(out, f"loss-{schedule}.csv")
        hist.to_csv(path)
        paths.append(path)
    plotting.plot_files(paths, os.path.join(out, "schedules.svg"), "training loss")
    print(f"chart written to {os.path.join(out, 'schedules.svg')}")


if __name__ == "__main__":
    main()
