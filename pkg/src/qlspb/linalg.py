"""Dense real linear-algebra substrate: SVD, direct solves, state distances
and Clenshaw-Curtis quadrature."""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from qlspb.errors import DomainError, EvaluationError, NumericalFailure, SingularMatrixError


@dataclass(frozen=True)
class SvdFactors:
    left: np.ndarray   # columns are left singular vectors
    sigma: np.ndarray  # nonincreasing
    right: np.ndarray  # columns are right singular vectors

    def reconstruct(self):
        return (self.left * self.sigma) @ self.right.T


def _as_finite_matrix(M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or min(M.shape) < 1:
        raise DomainError(f"expected a non-empty 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError("matrix has non-finite entries")
    return M


def svd(M):
    """Thin SVD with a deterministic sign convention.

    Each right singular vector is flipped so that its largest-magnitude entry
    is positive; the matching left vector is flipped with it.
    """
    M = _as_finite_matrix(M)
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    V = Vt.T
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return SvdFactors(U * signs, s, V * signs)


def singular_values(M):
    return np.linalg.svd(_as_finite_matrix(M), compute_uv=False)


def condition_number(M):
    s = singular_values(M)
    return float(s[0] / s[-1])


def direct_solve(A, b):
    """Classical solve of ``A x = b``; the reference solution for every run."""
    A = _as_finite_matrix(A)
    b = np.asarray(b, dtype=np.float64)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise DomainError(f"shape mismatch: A {A.shape}, b {b.shape}")
    smin = singular_values(A)[-1]
    if smin <= 1e-13:
        raise SingularMatrixError(float(smin))
    return np.linalg.solve(A, b)


def normalize(v):
    v = np.asarray(v, dtype=np.float64)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise DomainError("cannot normalize the zero vector")
    return v / nrm


def phase_fixed_distance(u, v):
    """sqrt(2 - 2|<u, v>|) for unit vectors: the l2 distance after aligning sign."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DomainError(f"dimension mismatch: {u.shape} vs {v.shape}")
    ov = min(1.0, abs(float(u @ v)))
    return math.sqrt(2.0 - 2.0 * ov)


def infidelity(u, v):
    ov = min(1.0, abs(float(np.asarray(u) @ np.asarray(v))))
    return 1.0 - ov * ov


def bures_from_infidelity(mu_sq):
    """Bures distance sqrt(2(1 - sqrt(1 - mu^2))) for a state with infidelity mu^2."""
    if mu_sq < -1e-12 or mu_sq > 1 + 1e-12:
        raise DomainError(f"infidelity {mu_sq} outside [0, 1]")
    mu_sq = min(max(mu_sq, 0.0), 1.0)
    # 1 - sqrt(1 - m) rewritten to avoid cancellation for small m
    return math.sqrt(2.0 * mu_sq / (1.0 + math.sqrt(1.0 - mu_sq)))


def infidelity_from_bures(delta):
    if delta < 0 or delta > math.sqrt(2) + 1e-12:
        raise DomainError(f"Bures distance {delta} outside [0, sqrt(2)]")
    f = 1.0 - delta * delta / 2.0
    return 1.0 - f * f


@lru_cache(maxsize=64)
def _cc_reference(nodes):
    n = nodes - 1
    k = np.arange(nodes)
    x = np.cos(np.pi * k / n)
    w = np.empty(nodes)
    j = np.arange(1, n // 2 + 1)
    b = np.where(2 * j == n, 1.0, 2.0)
    for i in range(nodes):
        s = np.sum(b / (4.0 * j * j - 1.0) * np.cos(2.0 * np.pi * j * i / n))
        c = 1.0 if i in (0, n) else 2.0
        w[i] = c / n * (1.0 - s)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def clenshaw_curtis_rule(nodes, lo, hi):
    """Closed Clenshaw-Curtis nodes (ascending, endpoints included) and weights on [lo, hi]."""
    if nodes < 2:
        raise DomainError("Clenshaw-Curtis needs at least 2 nodes")
    if not lo < hi:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    x, w = _cc_reference(nodes)
    half = 0.5 * (hi - lo)
    pts = (lo + hi) / 2.0 - half * x  # x runs 1 -> -1, so pts ascend
    pts[0], pts[-1] = lo, hi
    wts = w * half
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def clenshaw_curtis(f, lo, hi, nodes=30):
    pts, wts = clenshaw_curtis_rule(int(nodes), float(lo), float(hi))
    total = 0.0
    for x, w in zip(pts, wts):
        fx = f(x)
        if not math.isfinite(fx):
            raise EvaluationError(float(x), fx)
        total += w * fx
    return float(total)
