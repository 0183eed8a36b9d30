"""Sparse ensembles in three overlapping kappa bands: stage-1 cost at
Delta = 0.3 and the QW/Shortcut ratio rho against the bundled QW tables.

    python3 scripts/sparse_comparison.py --dims 32 64
"""

import argparse
from dataclasses import dataclass, field
import json
import os
import time

import numpy as np

from _common import out_dir, read_bundled
from qlspb.harness import bundled_baseline, compare, sweep_delta
from qlspb.instances import SPARSE, EnsembleSpec, generate_ensemble

BANDS = {"kappa1": (10.0, 30.0), "kappa2": (20.0, 40.0), "kappa3": (30.0, 50.0)}


@dataclass
class Config:
    dims: list = field(default_factory=lambda: [32, 64])
    bands: list = field(default_factory=lambda: list(BANDS))
    density: float = 0.02
    deltas: list = field(default_factory=lambda: [0.4, 0.3, 0.2])
    count: int = 100
    base_seed: int = 12
    double_stage1: bool = False
    out: str = "results/sparse"


def run(cfg):
    ref = {(int(r["dimension"]), r["band"]): float(r["rho"]) for r in read_bundled("shortcut_sparse.csv")}
    out_dir(cfg.out)
    rows = []
    for n in cfg.dims:
        base = bundled_baseline(f"qw_sparse_{n}.csv")
        for label in cfg.bands:
            t0 = time.perf_counter()
            ens = generate_ensemble(EnsembleSpec(SPARSE, n, BANDS[label], cfg.count, cfg.base_seed, cfg.density))
            rep = sweep_delta(ens, cfg.deltas, [1e-3], label=label)
            r = next(c for c in compare(rep, base, cfg.double_stage1) if c["delta"] == 0.3)
            r.update(dimension=n, kappa_avg=float(np.mean([i.kappa for i in ens])), rho_ref=ref.get((n, label)))
            rows.append(r)
            print(f"n={n} {label}: kappa_avg={r['kappa_avg']:.2f} SC={r['cost_sc']:.4g} QW={r['cost_qw']:.4g} "
                  f"rho={r['rho']:.3f} (published {r['rho_ref']})  ({time.perf_counter() - t0:.1f}s)")
    with open(os.path.join(cfg.out, "sparse_rho.json"), "w") as fh:
        json.dump({"comparison": rows}, fh, indent=1)
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    d = Config()
    p.add_argument("--dims", nargs="+", type=int, default=d.dims)
    p.add_argument("--bands", nargs="+", choices=list(BANDS), default=d.bands)
    p.add_argument("--density", type=float, default=d.density)
    p.add_argument("--count", type=int, default=d.count)
    p.add_argument("--base-seed", type=int, default=d.base_seed)
    p.add_argument("--double-stage1", action="store_true")
    p.add_argument("--out", default=d.out)
    a = p.parse_args()
    run(Config(a.dims, a.bands, a.density, d.deltas, a.count, a.base_seed, a.double_stage1, a.out))


if __name__ == "__main__":
    main()
