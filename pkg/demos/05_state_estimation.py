"""End-to-end state estimation for piecewise constant coefficients.

A reduced version of the 16-sensor experiment: 1000 snapshots on a 32x32
mesh, H1 sensor coordinates, POD complement and a one-block network
trained for 4e4 steps.  Reports the coefficient error and the relative
L2/H1 errors of the recovered states on held-out samples.
"""

import numpy as np

from dnnstate import estimation, fem, reduction, sensing, training


def main():
    mesh = fem.build_mesh(32)
    space = sensing.build_measurement_space(sensing.place_uniform(16), mesh, fem.H1)
    snaps = reduction.generate_snapshots("pwc", 1000, mesh, space, master_seed=1)
    train_idx, ghost_idx = reduction.split_train_ghost(len(snaps), 100, np.random.default_rng(0))
    basis = reduction.pod_complement(snaps.z[train_idx], mesh, fem.H1)
    c = reduction.extract_labels(snaps.solutions, basis, mesh)
    print(f"m = {space.m} sensors, k = {basis.k} complement modes")

    cfg = training.TrainConfig(lr=0.03, width=20, blocks=1, steps=40_000, seed=0)
    net, hist = training.train(snaps.w[train_idx], c[train_idx], cfg)
    est = estimation.Estimator(space, basis, net)
    i = ghost_idx
    res = estimation.evaluate(est, snaps.w[i], c[i], snaps.solutions[i])
    print(f"final training loss {hist.loss[-1]:.3e}")
    print(f"ghost set: ehat {res['ehat']:.2%}, relative L2 {res['rel_l2']:.2%}, "
          f"relative H1 {res['rel_h1']:.2%}, max H1 error {res['max_h1']:.3e}")

    # recover one state directly from its raw sensor readings
    o = space.observe(snaps.solutions[i[0]])
    u_star = estimation.predict_state(est, o)
    err = fem.norm(mesh, u_star - snaps.solutions[i[0]]) / fem.norm(mesh, snaps.solutions[i[0]])
    print(f"single recovery from raw readings: relative H1 error {err:.2%}")


if __name__ == "__main__":
    main()
