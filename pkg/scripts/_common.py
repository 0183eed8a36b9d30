"""Shared helpers for the experiment scripts."""

import csv
import os

from qlspb.harness import bundled_path


def read_bundled(name):
    """Rows of a bundled reference table as dicts (comment lines skipped)."""
    with open(bundled_path(name)) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def rel_dev(x, ref):
    return (x - ref) / ref
