"""Sensor coordinates: Riesz lifts, orthonormalization and the split u = P_W u + z.

Sixteen sensors sit at the centers of the checkerboard cells.  Their
functionals are lifted to the finite element space in the H1 and L2 inner
products, orthonormalized by a Cholesky factor and used to split a solution
into its observed part and the complement that the network has to predict.
"""

import numpy as np

from dnnstate import fem, reduction, sensing


def main():
    mesh = fem.build_mesh(64)
    sensors = sensing.place_uniform(16)
    _, sols = reduction.solve_snapshots("pwc", 1, mesh, master_seed=7)
    u = sols[0]
    o = sensing.apply_functionals(sensors, mesh, u)
    print("raw sensor values:", np.array2string(o[:4], precision=4), "...")

    for mode in fem.MODES:
        space = sensing.build_measurement_space(sensors, mesh, mode)
        Q = space.gram
        w = space.coords(u)
        z = sensing.project_complement(space, u)
        nu, nz = fem.norm(mesh, u, mode), fem.norm(mesh, z, mode)
        print(f"\n{mode}: Gram residual of the basis {np.abs(space.phi @ Q @ space.phi.T - np.eye(16)).max():.1e}")
        print(f"  observed share |w|^2/|u|^2 = {w @ w / nu**2:.4f}")
        print(f"  Pythagoras gap {abs(nu**2 - w @ w - nz**2) / nu**2:.1e}")
        print(f"  complement orthogonal to W: {np.abs(space.phi @ Q @ z).max():.1e}")
        # the coordinates are a fixed linear map of the raw values
        print(f"  w from raw values matches: {np.allclose(sensing.measure_coords(space, o), w)}")
    # a dependent layout is refused
    twin = sensing.SensorArray(np.vstack([sensors.centers, sensors.centers[:1]]), sensors.delta)
    try:
        sensing.build_measurement_space(twin, mesh)
    except Exception as exc:  # noqa: BLE001
        print(f"\nduplicated sensor rejected: {type(exc).__name__}: {exc}")


if __name__ == "__main__":
    main()
