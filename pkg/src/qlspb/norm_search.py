"""Unknown-norm regime: KR averaged over log-uniform norm guesses, plus
ensemble-level eta calibration.

With t = e^tau drawn over [L, R] = [1, kappa] (plus point masses at both
ends), the averaged success probability and success-conditioned infidelity are

    q    = (Q_L + Q_R + 2 int Q_t dtau) / (2 ln(R/L) + 2)
    mu^2 = (Q_L mu_L^2 + Q_R mu_R^2 + 2 int Q_t mu_t^2 dtau) / (q (2 ln(R/L) + 2))

The integrals use closed Clenshaw-Curtis in tau, whose end nodes double as
the point-mass evaluations.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os
import weakref

import numpy as np

from qlspb.errors import DegenerateSuccessError, DomainError, InfeasibleTargetError
from qlspb.engine import KRSetup, augment, known_norm_setup
from qlspb.filters import order_for
from qlspb.linalg import bures_from_infidelity, clenshaw_curtis_rule, direct_solve

ETA_LO = 1e-6
ETA_HI = 0.9


def thread_count():
    try:
        return max(1, int(os.environ.get("QLSPB_THREADS", "")))
    except ValueError:
        return min(8, os.cpu_count() or 1)


def parallel_map(fn, items):
    items = list(items)
    k = thread_count()
    if k == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(k) as ex:
        return list(ex.map(fn, items))


def average_over_guesses(q_at, mu_sq_at, lo, hi, nodes=30):
    """Evaluate the guess-averaged (q, mu^2) for arbitrary profiles.

    ``q_at`` and ``mu_sq_at`` take tau = ln t. Returns (q, mu_sq, endpoints).
    """
    taus, w = clenshaw_curtis_rule(int(nodes), math.log(lo), math.log(hi))
    Q = np.array([q_at(t) for t in taus])
    M = np.array([mu_sq_at(t) for t in taus])
    return _combine(Q, M, w, math.log(hi / lo))


def _combine(Q, M, w, span):
    z = 2.0 * span + 2.0
    q = (Q[0] + Q[-1] + 2.0 * float(w @ Q)) / z
    num = (Q[0] * M[0] + Q[-1] * M[-1] + 2.0 * float(w @ (Q * M))) / z
    mu2 = min(1.0, max(0.0, num / q)) if q > 0 else 1.0
    return q, mu2, (float(Q[0]), float(M[0]), float(Q[-1]), float(M[-1]))


@dataclass(frozen=True)
class NormSearchResult:
    q_succ: float
    mu_sq_avg: float
    bures_delta: float
    ua_calls: int
    nodes: int
    endpoints: tuple  # (Q_L, mu_L^2, Q_R, mu_R^2)
    eta: float = float("nan")
    node_q: tuple = field(default=(), repr=False)
    node_mu_sq: tuple = field(default=(), repr=False)

    @property
    def cost(self):
        """Expected U_A calls until a guess succeeds: degree / q."""
        return self.ua_calls / self.q_succ


class GuessGrid:
    """KR setups for one instance at every quadrature node in tau."""

    def __init__(self, inst, nodes=30):
        if nodes < 2:
            raise DomainError("need at least 2 quadrature nodes")
        self.inst = inst
        self.kappa = inst.kappa
        self.nodes = int(nodes)
        self.span = math.log(self.kappa)
        self.taus, self.weights = clenshaw_curtis_rule(self.nodes, 0.0, self.span)
        x = direct_solve(inst.A, inst.b)
        self.setups = []
        for tau in self.taus:
            t = min(math.exp(tau), self.kappa)
            self.setups.append(KRSetup(augment(inst, t, x), self.kappa))

    def evaluate_order(self, order, eta=float("nan")):
        Q = np.empty(self.nodes)
        M = np.empty(self.nodes)
        for i, s in enumerate(self.setups):
            try:
                r = s.run_order(order)
                Q[i], M[i] = r.p_succ, r.infidelity
            except DegenerateSuccessError as exc:
                # negligible weight in the average; keep the tiny value
                Q[i], M[i] = exc.p_succ, 1.0
        q, mu2, ends = _combine(Q, M, self.weights, self.span)
        return NormSearchResult(q, mu2, bures_from_infidelity(mu2), 2 * order, self.nodes, ends, eta,
                                tuple(Q), tuple(M))

    def evaluate(self, eta):
        return self.evaluate_order(order_for(1.0 / self.kappa, eta), eta)


_grid_cache = weakref.WeakKeyDictionary()
_known_cache = weakref.WeakKeyDictionary()


def guess_grid(inst, nodes=30):
    per = _grid_cache.setdefault(inst, {})
    if nodes not in per:
        per[nodes] = GuessGrid(inst, nodes)
    return per[nodes]


def known_setup(inst):
    if inst not in _known_cache:
        _known_cache[inst] = known_norm_setup(inst)
    return _known_cache[inst]


def evaluate_unknown_norm(inst, eta, nodes=30):
    if not 0 < eta <= 1:
        raise DomainError(f"eta {eta} outside (0, 1]")
    if nodes < 8:
        raise DomainError("unknown-norm evaluation needs at least 8 nodes")
    return guess_grid(inst, nodes).evaluate(eta)


@dataclass(frozen=True)
class CalibrationResult:
    eta: float
    mean_error: float
    iterations: int
    bracket: tuple
    target: float
    mode: str
    in_band: bool
    saturated: bool = False
    per_instance: tuple = field(default=(), repr=False)

    @property
    def bracket_exhausted(self):
        return not self.in_band

    @property
    def mean_cost(self):
        return float(np.mean([r["cost"] for r in self.per_instance]))

    def report(self, kappa=None, dimension=None, kind=None):
        return {"kappa": kappa, "dimension": dimension, "kind": kind, "target_delta": self.target,
                "eta": self.eta, "mean_error": self.mean_error, "mode": self.mode,
                "in_band": self.in_band, "per_instance": list(self.per_instance)}


MODES = ("known", "unknown")


def _ensemble_objective(ensemble, mode, nodes):
    if mode == "known":
        setups = parallel_map(known_setup, ensemble)

        def at(eta):
            rs = [s.run(eta) for s in setups]
            rows = tuple({"id": i.id, "error": r.error_l2, "infidelity": r.infidelity,
                          "ua_calls": r.ua_calls, "p_succ": r.p_succ, "cost": r.cost}
                         for i, r in zip(ensemble, rs))
            return float(np.mean([r.error_l2 for r in rs])), rows
    else:
        grids = parallel_map(lambda i: guess_grid(i, nodes), ensemble)

        def at(eta):
            rs = [g.evaluate(eta) for g in grids]
            rows = tuple({"id": i.id, "bures_delta": r.bures_delta, "error": r.bures_delta,
                          "infidelity": r.mu_sq_avg, "ua_calls": r.ua_calls, "q_succ": r.q_succ,
                          "cost": r.cost}
                         for i, r in zip(ensemble, rs))
            return float(np.mean([r.bures_delta for r in rs])), rows
    return at


def calibrate_eta(ensemble, target, mode="unknown", nodes=30, eta_lo=ETA_LO, eta_hi=ETA_HI,
                  max_iter=40):
    """Largest global eta whose ensemble-mean error stays at or below ``target``.

    Bisection on ln(eta). Error depends on eta only through the integer order,
    so it is a step function; the search keeps the largest feasible point and
    reports whether it landed in the band [0.9, 1.0] * target.
    """
    if not 1e-4 < target < 0.5:
        raise DomainError(f"target {target} outside (1e-4, 0.5)")
    if not ensemble:
        raise DomainError("empty ensemble")
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}")
    at = _ensemble_objective(list(ensemble), mode, nodes)
    e_hi, rows_hi = at(eta_hi)
    if e_hi <= target:
        return CalibrationResult(eta_hi, e_hi, 1, (eta_hi, eta_hi), target, mode,
                                 e_hi >= 0.9 * target, True, rows_hi)
    e_lo, rows_lo = at(eta_lo)
    if e_lo > target:
        raise InfeasibleTargetError(f"mean error {e_lo:.3e} at eta={eta_lo} already exceeds {target}")
    lo, hi = math.log(eta_lo), math.log(eta_hi)
    best = (eta_lo, e_lo, rows_lo)
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        e, rows = at(math.exp(mid))
        if e <= target:
            lo = mid
            best = (math.exp(mid), e, rows)
        else:
            hi = mid
    eta, err, rows = best
    return CalibrationResult(eta, err, it, (math.exp(lo), math.exp(hi)), target, mode,
                             0.9 * target <= err <= target, False, rows)


def monotonicity_probe(inst, etas, nodes=30, tol=1e-6):
    """Bures error per eta, and the indices where it drops by more than ``tol``."""
    etas = list(etas)
    if len(etas) < 3:
        raise DomainError("need at least 3 eta values")
    errs = [evaluate_unknown_norm(inst, e, nodes).bures_delta for e in etas]
    violations = [i for i in range(1, len(errs)) if errs[i] < errs[i - 1] - tol]
    return errs, violations
