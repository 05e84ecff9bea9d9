"""POD of the unobserved components.

Solves a few hundred piecewise constant snapshots, removes the part seen
by the sensors and compresses the rest with the method of snapshots in
the H1 inner product.  Prints the singular value decay, the retained
dimension for several energy levels and the labels of one snapshot.
"""

import numpy as np

from dnnstate import fem, reduction, sensing


def main(n_snapshots=400):
    mesh = fem.build_mesh(32)
    space = sensing.build_measurement_space(sensing.place_uniform(16), mesh, fem.H1)
    snaps = reduction.generate_snapshots("pwc", n_snapshots, mesh, space, master_seed=3)
    basis = reduction.pod_complement(snaps.z, mesh, fem.H1, energy=0.995)
    sv = basis.singular_values
    print(f"{n_snapshots} snapshots, leading singular values:",
          np.array2string(sv[:8] / sv[0], precision=3))
    for energy in (0.9, 0.99, 0.995, 0.999):
        k = reduction.pod_complement(snaps.z, mesh, fem.H1, energy=energy).k
        print(f"  energy {energy}: k = {k}")
    c = reduction.extract_labels(snaps.solutions, basis, mesh)
    tail = fem.norm(mesh, snaps.z[0] - c[0] @ basis.psi, fem.H1) / fem.norm(mesh, snaps.z[0], fem.H1)
    print(f"labels of snapshot 0 (k={basis.k}):", np.array2string(c[0][:5], precision=4), "...")
    print(f"relative POD tail of that complement: {tail:.2e}")


if __name__ == "__main__":
    main()
