"""Forward solves for the two coefficient families.

Draws one piecewise constant coefficient on the 4x4 checkerboard and one
log-normal coefficient from a Matern field, solves -div(a grad u) = 1 with
homogeneous Dirichlet data on a 64x64 mesh and reports a few norms.  The
last part checks second order L2 convergence on a manufactured solution.
"""

import time

import numpy as np

from dnnstate import fem, fields, reduction


def manufactured_error(n):
    mesh = fem.build_mesh(n)
    exact = lambda x1, x2: np.sin(np.pi * x1) * np.sin(np.pi * x2)
    # -Laplace(exact) = 2 pi^2 exact; the load is the P1 interpolant integrated against hats
    f = 2 * np.pi**2 * mesh.interpolate(exact)
    M = fem.gram_matrix(mesh, fem.L2)
    u = fem.solve_dirichlet(fem.gram_matrix(mesh, fem.H1), M @ f)
    return fem.norm(mesh, u - mesh.interpolate(exact), fem.L2)


def main():
    mesh = fem.build_mesh(64)
    print(f"mesh: {mesh.n_elements} triangles, {mesh.n_dofs} interior unknowns")
    for scenario in ("pwc", "log-normal"):
        t0 = time.perf_counter()
        params, sols = reduction.solve_snapshots(scenario, 1, mesh, master_seed=2024)
        dt = time.perf_counter() - t0
        u = sols[0]
        print(f"{scenario:>10}: max u = {u.max():.4f}, |u|_H1 = {fem.norm(mesh, u, fem.H1):.4f}, "
              f"|u|_L2 = {fem.norm(mesh, u, fem.L2):.4f}  ({1e3 * dt:.0f} ms)")
    y = np.full(16, 0.25)
    print("coefficient on cell 0 for y = 0.25:", fields.eval_s1(y, [0.1, 0.1]))

    print("\nmanufactured solution, L2 error of the FE solution")
    prev = None
    for n in (8, 16, 32, 64):
        err = manufactured_error(n)
        rate = "" if prev is None else f"  rate {np.log2(prev / err):.2f}"
        print(f"  n={n:3d}  {err:.3e}{rate}")
        prev = err


if __name__ == "__main__":
    main()
