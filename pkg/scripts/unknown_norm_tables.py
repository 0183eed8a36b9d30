"""Unknown-norm tables: Delta sweep per kappa with calibrated stage-1 eta,
recommended Delta and total cost per epsilon, printed next to the published
stage-1 cells.

    python3 scripts/unknown_norm_tables.py --dims 32 --kappas 20 320
"""

import argparse
from dataclasses import dataclass, field
import os
import time

from _common import out_dir, read_bundled, rel_dev
from qlspb.harness import emit_report, sweep_delta, sweep_table
from qlspb.instances import NON_HERMITIAN, EnsembleSpec, generate_ensemble


@dataclass
class Config:
    dims: list = field(default_factory=lambda: [32, 64])
    kappas: list = field(default_factory=lambda: [20, 40, 80, 160, 320])
    deltas: list = field(default_factory=lambda: [0.3, 0.2, 0.1, 0.05])
    epsilons: list = field(default_factory=lambda: [1e-2, 1e-3])
    count: int = 100
    nodes: int = 30
    base_seed: int = 2024
    out: str = "results/unknown_norm"


def published():
    return {(int(r["dimension"]), float(r["kappa"]), float(r["delta"])): (float(r["cost"]), float(r["eta"]))
            for r in read_bundled("shortcut_unknown_norm.csv")}


def run(cfg):
    ref = published()
    out_dir(cfg.out)
    reports = []
    for n in cfg.dims:
        for k in cfg.kappas:
            t0 = time.perf_counter()
            ens = generate_ensemble(EnsembleSpec(NON_HERMITIAN, n, float(k), cfg.count, cfg.base_seed))
            rep = sweep_delta(ens, cfg.deltas, cfg.epsilons, nodes=cfg.nodes, label=f"n{n}_k{k:g}")
            reports.append(rep)
            print(f"n={n} kappa={k:g} ({time.perf_counter() - t0:.1f}s)")
            for d, c, e, eta in zip(rep.delta_grid, rep.stage1_costs, rep.stage1_errors, rep.etas):
                r = ref.get((n, float(k), d))
                extra = f"  ref cost {r[0]:.3g} ({rel_dev(c, r[0]):+.1%}) ref eta {r[1]:g}" if r else ""
                print(f"   Delta={d:<5g} cost={c:9.4g} error={e:.4f} eta={eta:.4g}{extra}")
            for eps in cfg.epsilons:
                print(f"   eps={eps:g}: Delta*={rep.recommended_delta[eps]:.3g} "
                      f"total/kappa={rep.total_at_recommended[eps] / k:.2f}")
            rep.save(os.path.join(cfg.out, f"sweep_n{n}_k{k:g}.json"))
            emit_report(sweep_table(rep), "csv", os.path.join(cfg.out, f"sweep_n{n}_k{k:g}.csv"))
    return reports


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    d = Config()
    p.add_argument("--dims", nargs="+", type=int, default=d.dims)
    p.add_argument("--kappas", nargs="+", type=float, default=d.kappas)
    p.add_argument("--deltas", nargs="+", type=float, default=d.deltas)
    p.add_argument("--epsilons", nargs="+", type=float, default=d.epsilons)
    p.add_argument("--count", type=int, default=d.count)
    p.add_argument("--nodes", type=int, default=d.nodes)
    p.add_argument("--base-seed", type=int, default=d.base_seed)
    p.add_argument("--out", default=d.out)
    a = p.parse_args()
    run(Config(a.dims, a.kappas, a.deltas, a.epsilons, a.count, a.nodes, a.base_seed, a.out))


if __name__ == "__main__":
    main()
