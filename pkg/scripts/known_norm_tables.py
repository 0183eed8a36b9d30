"""Known-norm tables: calibrated global eta, Cost_avg/kappa and mean error
per (kind, n, epsilon, kappa), printed next to the published values.

    python3 scripts/known_norm_tables.py --kinds NonHermitian --dims 32 --epsilons 0.01
"""

import argparse
from dataclasses import dataclass, field
import os
import time

from _common import out_dir, read_bundled, rel_dev
from qlspb.harness import emit_report, known_norm_row, known_rows_table, worst_case_known_norm
from qlspb.instances import EnsembleSpec, generate_ensemble

KAPPAS = (20, 40, 80, 160, 320, 640, 1280, 2560)


@dataclass
class Config:
    kinds: list = field(default_factory=lambda: ["NonHermitian", "PositiveDefinite"])
    dims: list = field(default_factory=lambda: [32, 64])
    epsilons: list = field(default_factory=lambda: [1e-2, 1e-3])
    kappas: list = field(default_factory=lambda: list(KAPPAS))
    count: int = 100
    base_seed: int = 2024
    out: str = "results/known_norm"


def published():
    ref = {}
    for r in read_bundled("shortcut_known_norm.csv"):
        key = (r["kind"], int(r["dimension"]), float(r["epsilon"]), float(r["kappa"]))
        ref[key] = (float(r["cost_over_kappa"]), float(r["eta"]), float(r["mean_error"]))
    return ref


def run(cfg):
    ref = published()
    rows = []
    print(f"{'kind':>16} {'n':>3} {'eps':>6} {'kappa':>5} {'eta':>8} {'cost/k':>7} {'ref':>6} "
          f"{'dev':>7} {'error':>9} {'bound':>5}")
    for kind in cfg.kinds:
        for n in cfg.dims:
            for eps in cfg.epsilons:
                for k in cfg.kappas:
                    t0 = time.perf_counter()
                    ens = generate_ensemble(EnsembleSpec(kind, n, float(k), cfg.count, cfg.base_seed))
                    row = known_norm_row(ens, eps)
                    rows.append(row)
                    c = row.cost_avg_over_kappa
                    r = ref.get((kind, n, eps, float(k)))
                    dev = f"{rel_dev(c, r[0]):+.1%}" if r else "-"
                    print(f"{kind:>16} {n:>3} {eps:>6g} {k:>5} {row.eta:>8.4g} {c:>7.3f} "
                          f"{(r[0] if r else float('nan')):>6.2f} {dev:>7} {row.mean_error:>9.3e} "
                          f"{worst_case_known_norm(eps):>5.2f}  ({time.perf_counter() - t0:.1f}s)")
    out_dir(cfg.out)
    table = known_rows_table(rows)
    emit_report(table, "csv", os.path.join(cfg.out, "known_norm.csv"))
    emit_report(table, "json", os.path.join(cfg.out, "known_norm.json"))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    d = Config()
    p.add_argument("--kinds", nargs="+", default=d.kinds)
    p.add_argument("--dims", nargs="+", type=int, default=d.dims)
    p.add_argument("--epsilons", nargs="+", type=float, default=d.epsilons)
    p.add_argument("--kappas", nargs="+", type=float, default=d.kappas)
    p.add_argument("--count", type=int, default=d.count)
    p.add_argument("--base-seed", type=int, default=d.base_seed)
    p.add_argument("--out", default=d.out)
    a = p.parse_args()
    run(Config(a.kinds, a.dims, a.epsilons, [int(k) if k == int(k) else k for k in a.kappas],
               a.count, a.base_seed, a.out))


if __name__ == "__main__":
    main()
