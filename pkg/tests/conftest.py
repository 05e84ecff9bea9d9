"""Shared fixtures: a disk cache for expensive snapshot sets and the acceptance summary."""

import dataclasses
import hashlib
import json
import os

import pytest

from dnnstate import config, pipeline, reduction
from dnnstate.errors import FormatError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(ROOT, "configs")
CACHE_DIR = os.environ.get("DNNSTATE_TEST_CACHE", os.path.join(ROOT, "tests", ".cache"))

# criterion number -> (passed, description)
ACCEPTANCE = {}


def load_config(name, profile="desk"):
    return config.load(os.path.join(CONFIG_DIR, f"{name}.toml"), profile)


def _data_key(cfg):
    # everything that determines a snapshot except how many are drawn
    d = dict(cfg["data"])
    for key in ("n_snapshots", "n_ghost", "energy"):
        d.pop(key)
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def cached_snapshots(cfg):
    """Snapshots for ``cfg``; a stored prefix-compatible larger set is sliced.

    Snapshot ``s`` depends only on the master seed and ``s``, so the first
    ``n`` members of a larger set are exactly the set of size ``n``.
    """
    n = cfg["data"]["n_snapshots"]
    os.makedirs(CACHE_DIR, exist_ok=True)
    path = os.path.join(CACHE_DIR, f"{cfg['data']['scenario']}-{_data_key(cfg)}.bin")
    snaps = None
    if os.path.exists(path):
        try:
            if reduction.read_header(path)["n_samples"] >= n:
                snaps = reduction.read_snapshots(path)
        except FormatError:
            snaps = None
    if snaps is None:
        snaps = pipeline.generate(cfg)
        reduction.write_snapshots(path, snaps)
    if len(snaps) > n:
        snaps = dataclasses.replace(
            snaps, params=snaps.params[:n], solutions=snaps.solutions[:n], w=snaps.w[:n], z=snaps.z[:n]
        )
    return snaps


@pytest.fixture(scope="session")
def record():
    def _record(number, passed, description):
        ACCEPTANCE[number] = (bool(passed), description)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, description = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {description}")
