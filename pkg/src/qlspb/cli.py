"""Command-line entry point.

Every flag can also come from a JSON config file (``--config``); keys use the
long flag name with dashes or underscores, and flags given on the command line
win. Exit codes: 0 ok, 2 validation failure, 3 numerical failure.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from qlspb.errors import NumericalFailure, ParseError, ValidationError
from qlspb.instances import (KINDS, SPARSE, EnsembleSpec, ensure_parent, export_ensemble_csv,
                             generate_ensemble, load_ensemble, save_ensemble)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _floats(text):
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _kappa(text):
    v = _floats(text)
    if len(v) == 1:
        return v[0]
    if len(v) == 2:
        return tuple(v)
    raise argparse.ArgumentTypeError("kappa is a number or a lo,hi band")


def build_parser():
    p = argparse.ArgumentParser(prog="qlspb", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file with default values for any flag")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded ensemble file")
    g.add_argument("--kind", choices=KINDS, default="NonHermitian")
    g.add_argument("--n", type=int, default=32)
    g.add_argument("--kappa", type=_kappa, default=20.0, help="value, or lo,hi band for Sparse")
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--base-seed", type=int, default=0)
    g.add_argument("--density", type=float, default=0.0)
    g.add_argument("--out", required=True)
    g.add_argument("--csv", help="also export id,kappa_measured,nnz")

    k = sub.add_parser("run-known", help="known-norm runs with a global eta")
    k.add_argument("--ensemble", required=True)
    k.add_argument("--epsilon", type=float, default=0.01)
    k.add_argument("--eta-rule", choices=("calibrated", "worst-case"), default="calibrated")
    k.add_argument("--eta", type=float, help="fixed eta for the calibrated rule (default: calibrate)")
    k.add_argument("--out", required=True)

    u = sub.add_parser("run-unknown", help="unknown-norm evaluation at a fixed eta")
    u.add_argument("--ensemble", required=True)
    u.add_argument("--eta", type=float, required=True)
    u.add_argument("--nodes", type=int, default=30)
    u.add_argument("--out", required=True)

    c = sub.add_parser("calibrate", help="global eta for a target mean error")
    c.add_argument("--ensemble", required=True)
    c.add_argument("--target-delta", type=float, required=True)
    c.add_argument("--mode", choices=("unknown", "known"), default="unknown")
    c.add_argument("--nodes", type=int, default=30)
    c.add_argument("--out", required=True)

    s = sub.add_parser("sweep", help="Delta sweep with filter pricing")
    s.add_argument("--ensemble", required=True)
    s.add_argument("--delta-grid", type=_floats, default=[0.3, 0.2, 0.1, 0.05])
    s.add_argument("--epsilons", type=_floats, default=[1e-2, 1e-3])
    s.add_argument("--regime", choices=("unknown", "known"), default="unknown")
    s.add_argument("--nodes", type=int, default=30)
    s.add_argument("--label", default="")
    s.add_argument("--no-early-halving", action="store_true")
    s.add_argument("--out", required=True)

    m = sub.add_parser("compare", help="QW/Shortcut cost ratios against a baseline CSV")
    m.add_argument("--sweep", required=True)
    m.add_argument("--baseline", required=True, help="CSV path or the name of a bundled table")
    m.add_argument("--double-stage1", action="store_true")
    m.add_argument("--epsilon", type=float)
    m.add_argument("--out", required=True)

    r = sub.add_parser("report", help="long-format CSV/JSON from any result file")
    r.add_argument("--input", required=True)
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--out", required=True)
    return p


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{known.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ParseError(f"{known.config}: top level must be an object")
    cfg = {key.replace("-", "_"): v for key, v in cfg.items()}
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        dests = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, v in cfg.items():
            if key in dests:
                a = dests[key]
                if isinstance(v, list) and a.type is _floats:
                    v = [float(x) for x in v]
                elif isinstance(v, list) and a.type is _kappa:
                    v = tuple(float(x) for x in v)
                defaults[key] = v
                a.required = False
        sp.set_defaults(**defaults)


def _check_threads():
    v = os.environ.get("QLSPB_THREADS")
    if v is not None and (not v.strip().isdigit() or int(v) < 1):
        raise ValidationError(f"QLSPB_THREADS must be a positive integer, got {v!r}")


def _write_json(path, doc):
    ensure_parent(path)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _meta(spec, ens):
    kappa = list(spec.kappa) if isinstance(spec.kappa, tuple) else spec.kappa
    return {"kappa": kappa, "kappa_mean": float(np.mean([i.kappa for i in ens])),
            "dimension": spec.n, "kind": spec.kind}


def cmd_generate(a):
    if a.kind == SPARSE and not isinstance(a.kappa, tuple):
        raise ValidationError("Sparse ensembles need a kappa band lo,hi")
    if a.kind != SPARSE and isinstance(a.kappa, tuple):
        raise ValidationError("dense ensembles take a single kappa")
    spec = EnsembleSpec(a.kind, a.n, a.kappa, a.count, a.base_seed, a.density)
    ens = generate_ensemble(spec)
    ensure_parent(a.out)
    save_ensemble(spec, ens, a.out)
    if a.csv:
        ensure_parent(a.csv)
        export_ensemble_csv(ens, a.csv)
    return f"wrote {len(ens)} instances to {a.out}"


def cmd_run_known(a):
    from qlspb.harness import known_norm_row, KnownNormRow
    from qlspb.norm_search import known_setup
    spec, ens = load_ensemble(a.ensemble)
    if a.eta_rule == "calibrated" and a.eta is None:
        row = known_norm_row(ens, a.epsilon, "calibrated")
        eta = row.eta
    elif a.eta_rule == "calibrated":
        eta = a.eta
        row = None
    else:
        eta = a.epsilon / math.sqrt(2.0)
        row = None
    runs = []
    for inst in ens:
        s = known_setup(inst)
        runs.append(s.run(eta).record(inst.id, s.aug.t))
    if row is None:
        row = KnownNormRow(spec.kind, spec.n, float(np.mean([i.kappa for i in ens])), a.epsilon, eta,
                           float(np.mean([r["error_l2"] for r in runs])),
                           float(np.mean([r["cost"] for r in runs])),
                           float(np.mean([r["error_l2"] for r in runs])) <= a.epsilon, a.eta_rule)
    _write_json(a.out, {"known_norm": [row.record()], "runs": runs})
    return (f"eta={row.eta:.4g} mean_error={row.mean_error:.4g} "
            f"cost/kappa={row.cost_avg_over_kappa:.3f}")


def cmd_run_unknown(a):
    from qlspb.norm_search import evaluate_unknown_norm
    spec, ens = load_ensemble(a.ensemble)
    per = []
    for inst in ens:
        r = evaluate_unknown_norm(inst, a.eta, a.nodes)
        per.append({"id": inst.id, "q_succ": r.q_succ, "mu_sq_avg": r.mu_sq_avg,
                    "bures_delta": r.bures_delta, "ua_calls": r.ua_calls, "cost": r.cost})
    doc = dict(_meta(spec, ens), eta=a.eta, nodes=a.nodes,
               mean_error=float(np.mean([p["bures_delta"] for p in per])),
               mean_cost=float(np.mean([p["cost"] for p in per])), per_instance=per)
    _write_json(a.out, doc)
    return f"mean Bures error={doc['mean_error']:.4g} mean cost={doc['mean_cost']:.4g}"


def cmd_calibrate(a):
    from qlspb.norm_search import calibrate_eta
    spec, ens = load_ensemble(a.ensemble)
    cal = calibrate_eta(ens, a.target_delta, mode=a.mode, nodes=a.nodes)
    m = _meta(spec, ens)
    doc = cal.report(m["kappa"], m["dimension"], m["kind"])
    doc["per_instance"] = [{"id": r["id"], "bures_delta": r["error"], "ua_calls": r["ua_calls"],
                            "cost": r["cost"]} for r in cal.per_instance]
    doc["mean_cost"] = cal.mean_cost
    _write_json(a.out, doc)
    return f"eta={cal.eta:.4g} mean_error={cal.mean_error:.4g} in_band={cal.in_band}"


def cmd_sweep(a):
    from qlspb.harness import sweep_delta
    spec, ens = load_ensemble(a.ensemble)
    rep = sweep_delta(ens, a.delta_grid, a.epsilons, a.regime, a.nodes,
                      early_halving=not a.no_early_halving, label=a.label)
    ensure_parent(a.out)
    rep.save(a.out)
    rec = ", ".join(f"eps={e:g}: Delta*={d:.3g}" for e, d in rep.recommended_delta.items())
    return f"sweep over {len(rep.delta_grid)} Delta values; {rec}"


def _baseline(ref):
    from qlspb.harness import bundled_path, ingest_baseline
    if os.path.exists(ref):
        return ingest_baseline(ref)
    name = ref if ref.endswith(".csv") else ref + ".csv"
    path = bundled_path(name)
    if not os.path.exists(path):
        raise ValidationError(f"baseline {ref!r} is neither a file nor a bundled table")
    return ingest_baseline(path)


def cmd_compare(a):
    from qlspb.harness import SweepReport, compare
    rep = SweepReport.load(a.sweep)
    rows = compare(rep, _baseline(a.baseline), a.double_stage1, a.epsilon)
    _write_json(a.out, {"comparison": rows})
    return "\n".join(f"kappa={r['kappa']:g} delta={r['delta']:.3g} rho={r['rho']:.3f}" for r in rows)


def cmd_report(a):
    from qlspb.harness import (KnownNormRow, ReportTable, SweepReport, comparison_table,
                               emit_report, known_rows_table, sweep_table)
    try:
        with open(a.input) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{a.input}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if "delta_grid" in doc:
        table = sweep_table(SweepReport.from_json(doc))
    elif "comparison" in doc:
        table = comparison_table(doc["comparison"])
    elif "known_norm" in doc:
        fields = KnownNormRow.__dataclass_fields__
        table = known_rows_table([KnownNormRow(**{k: v for k, v in r.items() if k in fields})
                                  for r in doc["known_norm"]])
    elif "per_instance" in doc and "target_delta" in doc:
        table = ReportTable()
        table.add(doc["kappa"] if not isinstance(doc["kappa"], list) else math.sqrt(doc["kappa"][0] * doc["kappa"][1]),
                  "delta", doc["target_delta"], "eta", doc["eta"])
        table.add(table.rows[0][0], "delta", doc["target_delta"], "mean_error", doc["mean_error"])
    else:
        raise ParseError(f"{a.input}: unrecognized result file")
    ensure_parent(a.out)
    emit_report(table, a.format, a.out)
    return f"wrote {len(table)} rows to {a.out}"


COMMANDS = {"generate": cmd_generate, "run-known": cmd_run_known, "run-unknown": cmd_run_unknown,
            "calibrate": cmd_calibrate, "sweep": cmd_sweep, "compare": cmd_compare, "report": cmd_report}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        _check_threads()
        msg = COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValidationError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if msg:
        print(msg)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
