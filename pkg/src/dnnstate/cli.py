"""Command line driver: generate, train, evaluate, compare-affine, plot.

Exit codes: 0 success, 2 bad config, 3 artifacts that do not match the
config (or are missing), 4 malformed data files.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, affine, config, estimation, fem, pipeline, plotting, reduction, resnet
from .errors import ArtifactMismatchError, ConfigError, FormatError

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH, EXIT_FORMAT = 0, 2, 3, 4
CACHE_NAME = "snapshots.bin"


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out, command, cfg, inputs, outputs, timings):
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "seeds": {"master_seed": cfg["data"]["master_seed"], "train_seed": cfg["train"]["seed"],
                  "sensor_seed": cfg["data"]["sensor_seed"]},
        "inputs": {os.path.basename(p): sha256(p) for p in inputs},
        "outputs": {os.path.basename(p): sha256(p) for p in outputs},
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    path = os.path.join(out, f"manifest-{command}.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_cfg(args):
    cfg = config.load(args.config, args.profile)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg["data"]["master_seed"] = args.seed
        cfg["train"]["seed"] = args.seed
    return cfg


def _cache_path(args):
    return args.cache or os.path.join(args.out, CACHE_NAME)


def _read_cache(path):
    if not os.path.exists(path):
        raise ArtifactMismatchError(f"snapshot cache {path} not found; run `generate` first")
    return reduction.read_snapshots(path)


def _prepared(cfg, args):
    path = _cache_path(args)
    snaps = _read_cache(path)
    return pipeline.prepare(cfg, snaps), path


def cmd_generate(args):
    cfg = _load_cfg(args)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    snaps = pipeline.generate(cfg)
    path = os.path.join(args.out, CACHE_NAME)
    reduction.write_snapshots(path, snaps)
    # round trip check on what was written
    back = reduction.read_snapshots(path)
    if not np.array_equal(back.solutions, snaps.solutions):
        raise FormatError(f"{path}: round trip mismatch")
    write_manifest(args.out, "generate", cfg, [args.config], [path],
                   {"generate": time.perf_counter() - t0})
    print(f"wrote {len(snaps)} snapshots ({snaps.n_dofs} DOFs, m={snaps.m}) to {path}")
    return EXIT_OK


def cmd_train(args):
    cfg = _load_cfg(args)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    prep, cache = _prepared(cfg, args)
    timings = {"prepare": time.perf_counter() - t0}
    outputs = []
    for schedule in cfg["train"]["schedules"]:
        t1 = time.perf_counter()
        net, history = pipeline.train(cfg, prep, schedule)
        timings[f"train_{schedule}"] = time.perf_counter() - t1
        model = os.path.join(args.out, f"model-{schedule}.bin")
        loss = os.path.join(args.out, f"loss-{schedule}.csv")
        resnet.save(model, net)
        history.to_csv(loss)
        outputs += [model, loss]
        print(f"{schedule}: k={prep.basis.k} params={resnet.count_params(net)} "
              f"final loss {history.loss[-1]:.6e}")
    write_manifest(args.out, "train", cfg, [args.config, cache], outputs, timings)
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _load_cfg(args)
    t0 = time.perf_counter()
    prep, cache = _prepared(cfg, args)
    models = args.model or [os.path.join(args.out, f"model-{s}.bin") for s in cfg["train"]["schedules"]]
    rows = []
    for path in models:
        if not os.path.exists(path):
            raise ArtifactMismatchError(f"model {path} not found; run `train` first")
        net = resnet.load(path)
        name = os.path.splitext(os.path.basename(path))[0]
        scheme = name[len("model-"):] if name.startswith("model-") else name
        metrics = pipeline.evaluate(prep, net)
        rows.append(pipeline.table_row(cfg, net, scheme, metrics))
        print(f"{scheme}: ehat={metrics['ehat']:.4%} rel_l2={metrics['rel_l2']:.4%} "
              f"rel_h1={metrics['rel_h1']:.4%}")
    os.makedirs(args.out, exist_ok=True)
    table = os.path.join(args.out, "errors.csv")
    estimation.write_error_table(table, rows)
    write_manifest(args.out, "evaluate", cfg, [args.config, cache, *models], [table],
                   {"evaluate": time.perf_counter() - t0})
    return EXIT_OK


def compare_affine(cfg, snaps, mesh=None, log=print):
    """Comparison rows for POD-PBDW and the configured network over sensor counts."""
    d = cfg["data"]
    mesh = mesh or fem.build_mesh(d["mesh_n"])
    train_idx, ghost_idx = pipeline.split(cfg, len(snaps))
    U = snaps.solutions
    schedule = cfg["train"]["schedules"][0]
    rows = []
    for m in cfg["compare"]["sensor_counts"]:
        space = pipeline.measurement_space(cfg, mesh, m)
        w, z = reduction.measure_snapshots(space, U)
        n_max = min(m, cfg["compare"]["n_max"] or m)
        scan = affine.scan_dimensions(U[train_idx], space, U[ghost_idx], w[ghost_idx],
                                      range(n_max + 1))
        best = affine.best_dimension(scan)
        rows.append({"method": "pod-pbdw", "m": m, **best})
        basis = reduction.pod_complement(z[train_idx], mesh, d["mode"], d["energy"])
        c = reduction.extract_labels(U, basis, mesh)
        prep = pipeline.Prepared(mesh, space, basis, U, w, c, train_idx, ghost_idx)
        net, _ = pipeline.train(cfg, prep, schedule)
        res = pipeline.evaluate(prep, net)
        u_pred = estimation.predict_from_coords(
            estimation.Estimator(space, basis, net), w[ghost_idx])
        e = fem.norm(mesh, u_pred - U[ghost_idx], fem.H1)
        rows.append({"method": f"resnet-{schedule}", "m": m, "n": basis.k, "mu": float("nan"),
                     "max_h1": res["max_h1"], "mean_h1": float(e.mean())})
        log(f"m={m}: pod-pbdw n={best['n']} max_h1={best['max_h1']:.3e} mu={best['mu']:.3g}; "
            f"resnet k={basis.k} max_h1={res['max_h1']:.3e}")
    return rows


def cmd_compare_affine(args):
    cfg = _load_cfg(args)
    if any(m < 1 for m in cfg["compare"]["sensor_counts"]):
        raise ConfigError("sensor counts must be positive")
    if cfg["data"]["sensors"] != "random":
        raise ConfigError("compare-affine needs data.sensors = \"random\"")
    t0 = time.perf_counter()
    cache = _cache_path(args)
    snaps = _read_cache(cache)
    pipeline.check_snapshots(cfg, snaps, fem.build_mesh(cfg["data"]["mesh_n"]))
    rows = compare_affine(cfg, snaps)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "compare.csv")
    affine.write_comparison(path, rows)
    write_manifest(args.out, "compare-affine", cfg, [args.config, cache], [path],
                   {"compare": time.perf_counter() - t0})
    return EXIT_OK


def cmd_plot(args):
    out = args.out if args.out.endswith(".svg") else os.path.join(args.out, "plot.svg")
    if os.path.dirname(out):
        os.makedirs(os.path.dirname(out), exist_ok=True)
    plotting.plot_files(args.csv, out, args.title)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="dnnstate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_config=True):
        sp.add_argument("--config", required=need_config, help="experiment TOML file")
        sp.add_argument("--seed", type=int, help="override the master and training seeds")
        sp.add_argument("--out", default="runs", help="output directory")
        sp.add_argument("--profile", choices=config.PROFILES, default="desk")

    g = sub.add_parser("generate", help="solve snapshots and write the binary cache")
    common(g)
    g.set_defaults(func=cmd_generate)
    t = sub.add_parser("train", help="train the configured schedules")
    common(t)
    t.add_argument("--cache", help=f"snapshot cache (default OUT/{CACHE_NAME})")
    t.set_defaults(func=cmd_train)
    e = sub.add_parser("evaluate", help="error table on the ghost split")
    common(e)
    e.add_argument("--cache")
    e.add_argument("--model", nargs="*", help="model files (default OUT/model-<schedule>.bin)")
    e.set_defaults(func=cmd_evaluate)
    c = sub.add_parser("compare-affine", help="POD-PBDW vs network over sensor counts")
    common(c)
    c.add_argument("--cache")
    c.set_defaults(func=cmd_compare_affine)
    pl = sub.add_parser("plot", help="SVG line chart from loss or comparison CSVs")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--out", default="plot.svg", help="SVG file or directory")
    pl.add_argument("--title", default="")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactMismatchError as exc:
        print(f"artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except FormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
