"""Exact matrix-level simulation of kernel reflection (KR) and kernel
projection (KP).

Polynomials are applied straight to singular values: for an even polynomial
P and G = U diag(s) V^T, the post-selected block of the QSVT circuit acts as
V diag(P(s)) V^T on the input register. Only the polynomial degree is charged
as U_A calls.
"""

from dataclasses import dataclass
import math

import numpy as np

from qlspb.errors import (DegenerateSuccessError, DomainError, FilterDivergenceError,
                          GapViolationError, NumericalFailure)
from qlspb.filters import FilterSpec, eval_f, eval_k, order_for
from qlspb.linalg import direct_solve, svd

P_SUCC_FLOOR = 1e-14


@dataclass(frozen=True)
class AugmentedSystem:
    t: float
    At: np.ndarray
    b_prime: np.ndarray
    xt: np.ndarray        # normalized solution of At y = b'
    theta: float          # arctan(|x| / t)
    x_true: np.ndarray    # normalized A^-1 b, length n
    norm_x: float
    instance_id: str = ""

    @property
    def n(self):
        return self.x_true.shape[0]


def augment(inst, t, x=None):
    """Embed A into diag(A, 1/t) and b into (b, 1)/sqrt(2)."""
    kappa = inst.kappa if hasattr(inst, "kappa") else None
    A = np.asarray(inst.A, dtype=np.float64)
    b = np.asarray(inst.b, dtype=np.float64)
    if kappa is not None and not 1.0 <= t <= max(kappa, 1.0) * (1 + 1e-9):
        raise DomainError(f"norm guess t={t} outside [1, kappa={kappa}]")
    if t <= 0:
        raise DomainError("norm guess must be positive")
    if x is None:
        x = direct_solve(A, b)
    n = A.shape[0]
    At = np.zeros((n + 1, n + 1))
    At[:n, :n] = A
    At[n, n] = 1.0 / t
    bp = np.append(b, 1.0) / math.sqrt(2.0)
    nx = float(np.linalg.norm(x))
    xhat = x / nx
    theta = math.atan2(nx, t)
    xt = np.append(math.sin(theta) * xhat, math.cos(theta))
    return AugmentedSystem(float(t), At, bp, xt, theta, xhat, nx, getattr(inst, "id", ""))


@dataclass(frozen=True)
class KernelOperator:
    G: np.ndarray
    sigma: np.ndarray
    V: np.ndarray          # right singular vectors as columns
    kernel_dim: int
    kappa: float

    @property
    def threshold(self):
        return 0.5 / self.kappa

    def kernel_basis(self):
        return self.V[:, self.sigma < self.threshold]

    def apply(self, values, vec):
        """V diag(values) V^T vec."""
        return self.V @ (values * (self.V.T @ vec))


def build_kernel_operator(A, b, kappa, check_gap=True):
    """G = (I - b b^T) A together with its SVD.

    Singular values below 1/(2 kappa) count as kernel. Anything strictly
    between that threshold and 1/kappa breaks the spectral promise the filters
    rely on, which means the instance or kappa is wrong.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if abs(np.linalg.norm(b) - 1.0) > 1e-10:
        raise DomainError("b must be unit-norm")
    G = A - np.outer(b, b @ A)
    f = svd(G)
    thr = 0.5 / kappa
    if check_gap:
        bad = f.sigma[(f.sigma >= thr) & (f.sigma < 1.0 / kappa - 1e-9)]
        if bad.size:
            raise GapViolationError(
                f"singular values {bad.tolist()} fall inside the gap ({thr:.3e}, {1 / kappa:.3e})")
    kdim = int(np.sum(f.sigma < thr))
    return KernelOperator(G, f.sigma, f.right, kdim, float(kappa))


@dataclass(frozen=True)
class RunOutcome:
    p_succ: float
    output_state: np.ndarray
    error_l2: float
    infidelity: float
    ua_calls: int
    eta: float = float("nan")
    order: int = 0

    @property
    def cost(self):
        return self.ua_calls / self.p_succ

    def record(self, instance_id="", t=float("nan")):
        return {"instance_id": instance_id, "t": t, "eta": self.eta, "l": self.order,
                "degree": self.ua_calls, "p_succ": self.p_succ, "error_l2": self.error_l2,
                "infidelity": self.infidelity, "cost": self.cost}


class KRSetup:
    """One SVD of G_t, reusable for any eta.

    KR output depends on eta only through the order l, so calibration loops
    re-evaluate K on cached singular values instead of refactoring G_t.
    """

    def __init__(self, aug, kappa):
        self.aug = aug
        self.kappa = float(kappa)
        self.kop = build_kernel_operator(aug.At, aug.b_prime, self.kappa)
        n = aug.n
        self._c = self.kop.V[n, :].copy()          # V^T e_{m-1}
        self._top = self.kop.V[:n, :]              # rows of V for the first n coords
        self._cache = {}

    def final_vector(self, order):
        """Unnormalized post-selected state: first n coords of W e_{m-1}."""
        kv = eval_k(1.0 / self.kappa, order, np.minimum(self.kop.sigma, 1.0))
        return self._top @ (kv * self._c)

    def run_order(self, order, eta=float("nan")):
        if order in self._cache:
            p, out, err, mu2 = self._cache[order]
        else:
            f = self.final_vector(order)
            p = float(f @ f)
            if p < P_SUCC_FLOOR:
                raise DegenerateSuccessError(p)
            out = f / math.sqrt(p)
            ov = min(1.0, abs(float(out @ self.aug.x_true)))
            err = math.sqrt(max(0.0, 2.0 - 2.0 * ov))
            mu2 = max(0.0, 1.0 - ov * ov)
            self._cache[order] = (p, out, err, mu2)
        return RunOutcome(p, out, err, mu2, 2 * order, eta, order)

    def run(self, eta):
        return self.run_order(order_for(1.0 / self.kappa, eta), eta)


def run_kr(aug, eta, kappa, setup=None):
    """Kernel reflection from e_{m-1}, then post-selection away from e_{m-1}."""
    if not 0 < eta <= 1:
        raise DomainError(f"eta {eta} outside (0, 1]")
    setup = setup or KRSetup(aug, kappa)
    return setup.run(eta)


@dataclass(frozen=True)
class KPOutcome:
    p_succ: float
    output_state: np.ndarray
    infidelity_in: float
    infidelity_out: float
    ua_calls: int

    @property
    def cost(self):
        return self.ua_calls / self.p_succ


def _kernel_infidelity(kop, state):
    K = kop.kernel_basis()
    return max(0.0, 1.0 - float(np.sum((K.T @ state) ** 2)) / float(state @ state))


def run_kp(kop, state, eta, kappa):
    """Filter ``state`` towards ker(G); checks the refinement guarantees."""
    if not 0 < eta <= 1:
        raise DomainError(f"eta {eta} outside (0, 1]")
    state = np.asarray(state, dtype=np.float64)
    if abs(np.linalg.norm(state) - 1.0) > 1e-10:
        raise DomainError("input state must be unit-norm")
    mu2 = _kernel_infidelity(kop, state)
    if mu2 > 1 - 1e-12:
        raise FilterDivergenceError("input state is orthogonal to the kernel")
    spec = FilterSpec("KP", 1.0 / kappa, eta)
    fv = eval_f(spec.delta, spec.order, np.minimum(kop.sigma, 1.0))
    y = kop.apply(fv, state)
    p = float(y @ y)
    out = y / math.sqrt(p)
    mu2_out = _kernel_infidelity(kop, out)
    if p < 1.0 - mu2 - 1e-10 or mu2_out > mu2 * eta * eta / (1.0 - mu2) + 1e-10:
        raise NumericalFailure(f"KP guarantees violated: p={p}, mu2_in={mu2}, mu2_out={mu2_out}")
    return KPOutcome(p, out, mu2, mu2_out, spec.degree)


def run_kp_mixture(kop, states, weights, eta, kappa):
    """KP on the mixture sum_i w_i |phi_i><phi_i|.

    Returns (success probability, fidelity of the post-selected mixed output
    with the kernel).
    """
    weights = np.asarray(weights, dtype=np.float64)
    weights = weights / weights.sum()
    spec = FilterSpec("KP", 1.0 / kappa, eta)
    fv = eval_f(spec.delta, spec.order, np.minimum(kop.sigma, 1.0))
    K = kop.kernel_basis()
    p_tot = 0.0
    in_kernel = 0.0
    for w, phi in zip(weights, states):
        y = kop.apply(fv, np.asarray(phi, dtype=np.float64))
        p_tot += w * float(y @ y)
        in_kernel += w * float(np.sum((K.T @ y) ** 2))
    return p_tot, in_kernel / p_tot


ETA_RULES = ("calibrated", "worst-case")


def known_norm_run(inst, epsilon, eta_rule="worst-case", eta=None, setup=None):
    """Single KR stage with t = |x| taken from the classical solve.

    ``eta_rule='worst-case'`` uses eta = epsilon / sqrt(2); ``'calibrated'``
    uses the supplied (typically ensemble-calibrated) eta.
    """
    if not 0 < epsilon < 0.5:
        raise DomainError(f"epsilon {epsilon} outside (0, 0.5)")
    if eta_rule == "worst-case":
        eta = epsilon / math.sqrt(2.0)
    elif eta_rule == "calibrated":
        if eta is None:
            raise DomainError("calibrated rule needs an eta")
    else:
        raise DomainError(f"unknown eta rule {eta_rule!r}")
    if setup is None:
        x = direct_solve(inst.A, inst.b)
        setup = KRSetup(augment(inst, float(np.linalg.norm(x)), x), inst.kappa)
    return setup.run(eta)


def known_norm_setup(inst):
    x = direct_solve(inst.A, inst.b)
    return KRSetup(augment(inst, min(float(np.linalg.norm(x)), inst.kappa), x), inst.kappa)


def kr_probability_bounds(theta, eta):
    """Sandwich on the KR success probability at guess angle theta."""
    s2 = math.sin(2.0 * theta) ** 2
    return s2 * ((1 - eta) / (1 + eta)) ** 2, s2 + 4 * eta * eta / (1 + eta) ** 2


def kr_error_bound(theta, eta):
    c = math.cos(theta)
    return math.asin(min(1.0, eta / c)) if c > 0 else math.pi / 2
