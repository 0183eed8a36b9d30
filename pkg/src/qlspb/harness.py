"""Cost model, Delta sweeps, baseline ingestion, QW/Shortcut comparison and
report emission."""

from dataclasses import asdict, dataclass, field
from importlib import resources
import csv
import json
import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from qlspb.errors import (DivergentCostError, DomainError, EmptyComparisonError,
                          InfeasibleTargetError, NoOpFilterError, ParseError, ValidationError)
from qlspb.filters import order_for
from qlspb.linalg import bures_from_infidelity, infidelity_from_bures
from qlspb.norm_search import calibrate_eta

REFINE_POINTS = 200


# -- cost model -------------------------------------------------------------

@dataclass(frozen=True)
class FilterCost:
    degree: int
    success: float
    expected_calls: float
    eta_kp: float
    early_halving: bool = True


NO_FILTER = FilterCost(0, 1.0, 0.0, 1.0, False)


def trace_budget(epsilon):
    """Trace distance of two pure states at Bures (= l2) distance epsilon."""
    return epsilon * math.sqrt(1.0 - epsilon * epsilon / 4.0)


def filter_cost(mu_sq_in, epsilon_final, kappa, early_halving=True):
    """KP filter taking an input of infidelity ``mu_sq_in`` down to Bures error
    ``epsilon_final``.

    Failed LCU attempts are detected on average halfway through, so with
    ``early_halving`` a failure costs half the degree.
    """
    if not 0 <= mu_sq_in < 1:
        raise DomainError(f"input infidelity {mu_sq_in} outside [0, 1)")
    if not epsilon_final > 0:
        raise DomainError("final error must be positive")
    if mu_sq_in == 0:
        eta = 1.0
    else:
        if epsilon_final >= bures_from_infidelity(mu_sq_in):
            raise NoOpFilterError(
                f"target {epsilon_final} is not below the input error {bures_from_infidelity(mu_sq_in):.4g}")
        mu = math.sqrt(mu_sq_in)
        eta = min(1.0, trace_budget(epsilon_final) * math.sqrt(1.0 - mu_sq_in) / mu)
    deg = 2 * order_for(1.0 / kappa, eta)
    p = 1.0 - mu_sq_in
    fail = 0.5 if early_halving else 1.0
    return FilterCost(deg, p, deg * (p + (1.0 - p) * fail), eta, early_halving)


@dataclass(frozen=True)
class CostBreakdown:
    stage1_degree: float
    q_succ: float
    filter_degree: int
    filter_success: float
    expected_total: float
    early_halving: bool
    doubled_stage1: bool


def total_cost(stage1_degree, q_succ, filter=None, doubled_stage1=False):
    """Expected U_A calls per accepted output: (s + q E_f) / (q p_f).

    ``doubled_stage1`` charges two calls per stage-1 step (walk-style
    accounting); the filter is never doubled.
    """
    if not 0 < q_succ <= 1 + 1e-12:
        if q_succ == 0:
            raise DivergentCostError("stage-1 success probability is zero")
        raise DomainError(f"success probability {q_succ} outside (0, 1]")
    f = filter or NO_FILTER
    if f.success <= 0:
        raise DivergentCostError("filter success probability is zero")
    s = stage1_degree * (2.0 if doubled_stage1 else 1.0)
    total = (s + q_succ * f.expected_calls) / (q_succ * f.success)
    return CostBreakdown(stage1_degree, q_succ, f.degree, f.success, total, f.early_halving, doubled_stage1)


def worst_case_known_norm(epsilon):
    """kappa-normalized worst-case cost ln(2 sqrt(2) / epsilon)."""
    return math.log(2.0 * math.sqrt(2.0) / epsilon)


# -- known-norm tables ------------------------------------------------------

@dataclass(frozen=True)
class KnownNormRow:
    kind: str
    dimension: int
    kappa: float
    epsilon: float
    eta: float
    mean_error: float
    cost_avg: float
    in_band: bool
    eta_rule: str = "calibrated"

    @property
    def cost_avg_over_kappa(self):
        return self.cost_avg / self.kappa

    @property
    def worst_case_over_kappa(self):
        return worst_case_known_norm(self.epsilon)

    def record(self):
        d = asdict(self)
        d["cost_avg_over_kappa"] = self.cost_avg_over_kappa
        d["worst_case_over_kappa"] = self.worst_case_over_kappa
        return d


def known_norm_row(ensemble, epsilon, eta_rule="calibrated"):
    """Ensemble-mean cost and error with a single global eta."""
    from qlspb.norm_search import known_setup
    inst = ensemble[0]
    if eta_rule == "calibrated":
        cal = calibrate_eta(ensemble, epsilon, mode="known")
        eta, err, cost, band = cal.eta, cal.mean_error, cal.mean_cost, cal.in_band
    elif eta_rule == "worst-case":
        eta = epsilon / math.sqrt(2.0)
        rs = [known_setup(i).run(eta) for i in ensemble]
        err = float(np.mean([r.error_l2 for r in rs]))
        cost = float(np.mean([r.cost for r in rs]))
        band = err <= epsilon
    else:
        raise DomainError(f"unknown eta rule {eta_rule!r}")
    return KnownNormRow(inst.kind, inst.n, float(np.mean([i.kappa for i in ensemble])), epsilon,
                        eta, err, cost, band, eta_rule)


# -- Delta sweeps -----------------------------------------------------------

def recommend_delta(deltas, totals, refine=REFINE_POINTS):
    """Minimize a monotone cubic interpolant of total(Delta) in ln Delta.

    Returns (delta*, total*, at_boundary). Grid points are always candidates,
    so total* never exceeds the best grid value.
    """
    d = np.asarray(deltas, dtype=np.float64)
    y = np.asarray(totals, dtype=np.float64)
    ok = np.isfinite(y)
    d, y = d[ok], y[ok]
    if d.size == 0:
        raise DomainError("no finite totals to interpolate")
    order = np.argsort(d)
    d, y = d[order], y[order]
    if d.size == 1:
        return float(d[0]), float(y[0]), True
    x = np.log(d)
    xs = np.concatenate([np.linspace(x[0], x[-1], refine), x])
    ys = PchipInterpolator(x, y)(xs)
    k = int(np.argmin(ys))
    dstar = float(math.exp(xs[k]))
    boundary = bool(np.isclose(xs[k], x[0]) or np.isclose(xs[k], x[-1]))
    return dstar, float(ys[k]), boundary


@dataclass
class SweepReport:
    kind: str
    dimension: int
    kappa: float
    regime: str
    delta_grid: list
    stage1_costs: list
    stage1_errors: list
    etas: list
    in_band: list
    total_cost_curves: dict = field(default_factory=dict)
    recommended_delta: dict = field(default_factory=dict)
    total_at_recommended: dict = field(default_factory=dict)
    boundary_minimum: dict = field(default_factory=dict)
    flagged_deltas: list = field(default_factory=list)
    label: str = ""
    early_halving: bool = True

    @property
    def partial(self):
        return bool(self.flagged_deltas)

    def to_json(self):
        d = asdict(self)
        for key in ("total_cost_curves", "recommended_delta", "total_at_recommended", "boundary_minimum"):
            d[key] = {repr(float(e)): v for e, v in d[key].items()}
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        for key in ("total_cost_curves", "recommended_delta", "total_at_recommended", "boundary_minimum"):
            d[key] = {float(e): v for e, v in d.get(key, {}).items()}
        return cls(**d)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_json(json.load(fh))
        except (json.JSONDecodeError, TypeError) as exc:
            raise ParseError(f"{path}: not a sweep report ({exc})") from exc


REGIMES = ("known", "unknown")


def _per_instance_totals(rows, filt, mode):
    q_key = "q_succ" if mode == "unknown" else "p_succ"
    return float(np.mean([total_cost(r["ua_calls"], r[q_key], filt).expected_total for r in rows]))


def sweep_delta(ensemble, delta_grid, epsilons, regime="unknown", nodes=30, early_halving=True, label=""):
    """Calibrate a global eta per Delta, then price the KP filter to each final epsilon.

    The filter is sized from the calibrated mean stage-1 error (the only
    error figure a user would know in advance); each instance then pays its
    own stage-1 degree and success probability.
    """
    grid = [float(d) for d in delta_grid]
    eps = [float(e) for e in epsilons]
    if len(grid) < 3:
        raise DomainError("delta grid needs at least 3 points")
    if any(not 0 < d < 0.5 for d in grid):
        raise DomainError("delta grid values must lie in (0, 0.5)")
    if any(e >= min(grid) or e <= 0 for e in eps):
        raise DomainError("every epsilon must be positive and below the smallest Delta")
    if regime not in REGIMES:
        raise DomainError(f"regime must be one of {REGIMES}")
    ensemble = list(ensemble)
    kappa = float(np.mean([i.kappa for i in ensemble]))
    rep = SweepReport(ensemble[0].kind, ensemble[0].n, kappa, regime, grid, [], [], [], [],
                      label=label, early_halving=early_halving)
    curves = {e: [] for e in eps}
    for d in grid:
        try:
            cal = calibrate_eta(ensemble, d, mode=regime, nodes=nodes)
        except InfeasibleTargetError:
            rep.flagged_deltas.append(d)
            for lst in (rep.stage1_costs, rep.stage1_errors, rep.etas):
                lst.append(math.nan)
            rep.in_band.append(False)
            for e in eps:
                curves[e].append(math.nan)
            continue
        rep.stage1_costs.append(cal.mean_cost)
        rep.stage1_errors.append(cal.mean_error)
        rep.etas.append(cal.eta)
        rep.in_band.append(cal.in_band)
        mu_sq = infidelity_from_bures(min(cal.mean_error, math.sqrt(2.0)))
        for e in eps:
            kap = max(i.kappa for i in ensemble)
            filt = filter_cost(mu_sq, e, kap, early_halving) if e < cal.mean_error else NO_FILTER
            curves[e].append(_per_instance_totals(cal.per_instance, filt, regime))
    rep.total_cost_curves = curves
    for e in eps:
        if np.all(~np.isfinite(curves[e])):
            continue
        dstar, tot, edge = recommend_delta(grid, curves[e])
        rep.recommended_delta[e] = dstar
        rep.total_at_recommended[e] = tot
        rep.boundary_minimum[e] = edge
    return rep


# -- baselines --------------------------------------------------------------

METHODS = ("QW", "Randomised")
BASELINE_COLUMNS = ("method", "kappa", "delta", "cost", "mean_error")


@dataclass(frozen=True)
class BaselineRecord:
    method: str
    kappa: float
    delta: float
    cost: float
    mean_error: float
    alpha_avg: float | None = None
    dimension: int | None = None
    kind: str = ""
    label: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if not self.cost > 0:
            raise ValidationError(f"cost must be positive, got {self.cost}")
        if not 0 < self.delta <= 0.5:
            raise ValidationError(f"delta {self.delta} outside (0, 0.5]")


def _opt_float(s):
    s = (s or "").strip()
    return None if s in ("", "---", "-") else float(s)


def ingest_baseline(path):
    """Parse a baseline CSV. Lines starting with '#' are provenance notes."""
    with open(path, newline="") as fh:
        lines = [(i + 1, ln) for i, ln in enumerate(fh) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError(f"{path}: no header row")
    reader = csv.DictReader([ln for _, ln in lines])
    missing = [c for c in BASELINE_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ParseError(f"{path}: header lacks columns {missing}")
    out = []
    for (lineno, _), row in zip(lines[1:], reader):
        try:
            dim = _opt_float(row.get("dimension"))
            out.append(BaselineRecord(
                method=row["method"].strip(), kappa=float(row["kappa"]), delta=float(row["delta"]),
                cost=float(row["cost"]), mean_error=float(row["mean_error"]),
                alpha_avg=_opt_float(row.get("alpha_avg")),
                dimension=None if dim is None else int(dim),
                kind=(row.get("kind") or "").strip(), label=(row.get("label") or "").strip()))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise ValidationError(f"{path}: row at line {lineno}: {exc}") from exc
            raise ParseError(f"{path}: malformed row at line {lineno}: {exc}") from exc
    return out


def bundled_baseline(name):
    """Path-free access to a reference table shipped in qlspb/data."""
    ref = resources.files("qlspb") / "data" / name
    with resources.as_file(ref) as p:
        return ingest_baseline(p)


def bundled_path(name):
    return str(resources.files("qlspb") / "data" / name)


# -- comparison -------------------------------------------------------------

def _matches(report, rec, rel=1e-6):
    if rec.dimension is not None and rec.dimension != report.dimension:
        return False
    if report.label and rec.label:
        return report.label == rec.label
    return abs(rec.kappa - report.kappa) <= rel * max(1.0, report.kappa)


def compare(report, baseline, double_stage1=False, epsilon=None, method="QW", early_halving=True):
    """Cost ratio rho = Cost_QW / Cost_SC on overlapping (kappa, Delta) cells.

    Without ``epsilon`` stage-1 costs are compared at each shared Delta. With
    ``epsilon`` both methods are priced through the filter and compared at
    their own recommended Delta.
    """
    recs = [r for r in baseline if r.method == method and _matches(report, r)]
    rows = []
    if epsilon is None:
        for d, sc, err in zip(report.delta_grid, report.stage1_costs, report.stage1_errors):
            for r in recs:
                if abs(r.delta - d) <= 1e-9 and math.isfinite(sc):
                    qw = r.cost * (2.0 if double_stage1 else 1.0)
                    rows.append({"kappa": report.kappa, "label": report.label, "delta": d,
                                 "epsilon": math.nan, "cost_qw": qw, "cost_sc": sc, "rho": qw / sc,
                                 "error_qw": r.mean_error, "error_sc": err, "doubled": double_stage1})
    else:
        sc = report.total_at_recommended.get(float(epsilon))
        if sc is not None and recs:
            totals, ds = [], []
            for r in recs:
                mu_sq = infidelity_from_bures(r.mean_error)
                filt = filter_cost(mu_sq, epsilon, report.kappa, early_halving) if epsilon < r.mean_error else NO_FILTER
                totals.append(total_cost(r.cost, 1.0, filt, double_stage1).expected_total)
                ds.append(r.delta)
            if len(set(ds)) == len(ds):
                dstar, qw, _ = recommend_delta(ds, totals)
            else:
                k = int(np.argmin(totals))
                dstar, qw = ds[k], totals[k]
            rows.append({"kappa": report.kappa, "label": report.label, "delta": dstar,
                         "epsilon": float(epsilon), "cost_qw": qw, "cost_sc": sc, "rho": qw / sc,
                         "error_qw": math.nan, "error_sc": math.nan, "doubled": double_stage1})
    if not rows:
        raise EmptyComparisonError(
            f"no baseline rows overlap kappa={report.kappa:g} label={report.label!r} grid={report.delta_grid}")
    return rows


# -- reports ----------------------------------------------------------------

REPORT_COLUMNS = ("kappa", "axis", "axis_value", "metric", "value")


def sig6(x):
    return float(f"{x:.6g}") if isinstance(x, float) and math.isfinite(x) else x


@dataclass
class ReportTable:
    """Long-format rows: one value per (kappa, axis, axis_value, metric)."""
    rows: list = field(default_factory=list)

    def add(self, kappa, axis, axis_value, metric, value):
        self.rows.append((float(kappa), str(axis), float(axis_value), str(metric), float(value)))

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r[0], r[1], r[2], r[3]))

    def __len__(self):
        return len(self.rows)


def known_rows_table(rows):
    t = ReportTable()
    for r in rows:
        for m in ("eta", "mean_error", "cost_avg", "cost_avg_over_kappa", "worst_case_over_kappa"):
            t.add(r.kappa, "epsilon", r.epsilon, m, getattr(r, m))
    return t


def sweep_table(rep):
    t = ReportTable()
    for i, d in enumerate(rep.delta_grid):
        t.add(rep.kappa, "delta", d, "stage1_cost", rep.stage1_costs[i])
        t.add(rep.kappa, "delta", d, "stage1_error", rep.stage1_errors[i])
        t.add(rep.kappa, "delta", d, "eta", rep.etas[i])
        for e, curve in rep.total_cost_curves.items():
            t.add(rep.kappa, "delta", d, f"total_eps_{e:g}", curve[i])
    for e in rep.recommended_delta:
        t.add(rep.kappa, "epsilon", e, "recommended_delta", rep.recommended_delta[e])
        t.add(rep.kappa, "epsilon", e, "total_at_recommended", rep.total_at_recommended[e])
    return t


def comparison_table(rows):
    t = ReportTable()
    for r in rows:
        axis, val = ("epsilon", r["epsilon"]) if math.isfinite(r["epsilon"]) else ("delta", r["delta"])
        for m in ("cost_qw", "cost_sc", "rho"):
            t.add(r["kappa"], axis, val, m, r[m])
    return t


def emit_report(table, fmt, path):
    """Write a ReportTable as long-format CSV or JSON, 6 significant digits."""
    rows = [tuple(sig6(v) for v in r) for r in table.sorted_rows()]
    fmt = fmt.lower()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for r in rows:
                w.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in r])
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump({"columns": list(REPORT_COLUMNS), "rows": [list(r) for r in rows]}, fh, indent=1)
    else:
        raise DomainError(f"report format must be csv or json, got {fmt!r}")


def read_report(path):
    with open(path) as fh:
        text = fh.read()
    t = ReportTable()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        for r in doc["rows"]:
            t.add(*r)
        return t
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header is None or tuple(header) != REPORT_COLUMNS:
        raise ParseError(f"{path}: expected header {REPORT_COLUMNS}")
    for i, r in enumerate(reader, start=2):
        try:
            t.add(float(r[0]), r[1], float(r[2]), r[3], float(r[4]))
        except (IndexError, ValueError) as exc:
            raise ParseError(f"{path}: malformed row at line {i}") from exc
    return t
