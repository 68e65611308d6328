"""Causal rate-distortion machinery for first-order Gauss-Markov sources.

Finite-length sources follow ``x(k+1) = a_k x(k) + xi(k)``. The sequential
RDF under a per-sample distortion schedule has a closed form in terms of the
*effective* distortions, and its unique realization is built recursively
(:func:`procedure1`). :func:`vector_channel` turns that realization into a
matrix AWGN channel ``y = B A x + B n``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, SingularBlockError

COND_LIMIT = 1e12
SPAN_TOL = 1e-8
EIG_CLIP = -1e-10


@dataclass(frozen=True)
class GmSchedule:
    sigma0_sq: float
    a: tuple[float, ...]
    xi_var: tuple[float, ...]
    D: tuple[float, ...]

    def __post_init__(self):
        for name in ("a", "xi_var", "D"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        n = len(self.D)
        if n < 1:
            raise DomainError("schedule needs at least one distortion constraint")
        if len(self.a) != n - 1 or len(self.xi_var) != n - 1:
            raise DomainError(f"a and xi_var must have length {n - 1}, got {len(self.a)} and {len(self.xi_var)}")
        if not self.sigma0_sq > 0 or any(v <= 0 for v in self.xi_var):
            raise DomainError("all variances must be positive")
        if any(d <= 0 for d in self.D):
            raise DomainError("all distortion constraints must be positive")

    @property
    def length(self) -> int:
        return len(self.D)

    @classmethod
    def stationary(cls, a: float, xi_var: float, D: float | ArrayLike, length: int | None = None):
        """Stationary AR(1) start (x(1) at its steady-state variance)."""
        D = np.atleast_1d(np.asarray(D, dtype=float))
        if length is not None:
            D = np.broadcast_to(D, (length,)) if D.size == 1 else D
        n = D.size
        return cls(xi_var / (1.0 - a * a), (a,) * (n - 1), (xi_var,) * (n - 1), tuple(D))

    def source_covariance(self) -> NDArray:
        n = self.length
        var = np.empty(n)
        var[0] = self.sigma0_sq
        for k in range(1, n):
            var[k] = self.a[k - 1] ** 2 * var[k - 1] + self.xi_var[k - 1]
        K = np.diag(var)
        for i in range(n):
            c = var[i]
            for j in range(i + 1, n):
                c *= self.a[j - 1]
                K[i, j] = K[j, i] = c
        return K

    def to_json(self) -> dict:
        return {"sigma0_sq": self.sigma0_sq, "a": list(self.a), "xi_var": list(self.xi_var), "D": list(self.D)}

    @classmethod
    def from_json(cls, doc: dict) -> "GmSchedule":
        missing = {"sigma0_sq", "a", "xi_var", "D"} - set(doc)
        if missing:
            raise DomainError(f"schedule document lacks keys {sorted(missing)}")
        return cls(doc["sigma0_sq"], doc["a"], doc["xi_var"], doc["D"])

    @classmethod
    def load(cls, path: str | Path) -> "GmSchedule":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def effective_distortions(sched: GmSchedule) -> NDArray:
    d = np.empty(sched.length)
    d[0] = min(sched.sigma0_sq, sched.D[0])
    for k in range(1, sched.length):
        d[k] = min(sched.a[k - 1] ** 2 * d[k - 1] + sched.xi_var[k - 1], sched.D[k])
    return d


def srdf_value(sched: GmSchedule) -> float:
    """Sequential RDF in nats/sample (average over the block)."""
    d = effective_distortions(sched)
    prior = np.empty_like(d)
    prior[0] = sched.sigma0_sq
    prior[1:] = np.asarray(sched.a) ** 2 * d[:-1] + np.asarray(sched.xi_var)
    terms = np.log(prior / d)
    # each term is >= 0 by construction of d; clip rounding noise
    return float(0.5 * np.sum(np.maximum(terms, 0.0)) / sched.length)


def rcit_ar1(a: float, xi_var: float, D: float) -> float:
    """Stationary causal RDF of an AR(1) source, nats/sample."""
    if not abs(a) < 1:
        raise DomainError("|a| must be < 1")
    if not xi_var > 0 or not D > 0:
        raise DomainError("xi_var and D must be positive")
    return max(0.0, 0.5 * np.log(a * a + xi_var / D))


def rcit_ar1_inverse(a: float, xi_var: float, rate_nats: float) -> float:
    """Distortion at which :func:`rcit_ar1` equals ``rate_nats`` (> 0)."""
    if not rate_nats > 0:
        raise DomainError("rate must be positive")
    return xi_var / (np.exp(2.0 * rate_nats) - a * a)


@dataclass(frozen=True)
class GmRealization:
    K_x: NDArray
    K_y: NDArray
    K_yx: NDArray
    d: NDArray

    @property
    def length(self) -> int:
        return self.K_x.shape[0]

    def joint_covariance(self) -> NDArray:
        return np.block([[self.K_x, self.K_yx.T], [self.K_yx, self.K_y]])

    def estimator_matrix(self) -> NDArray:
        """``K_yx K_x^{-1}``; lower triangular iff the realization is causal."""
        return _solve_sym(self.K_x, self.K_yx.T, "K_x").T

    def error_variances(self) -> NDArray:
        return np.diag(self.K_y - self.K_yx - self.K_yx.T + self.K_x)

    def mutual_information(self) -> float:
        """``I(x; y) = h(x) - h(x | y)`` in nats.

        The conditional covariance uses a pseudo-inverse of ``K_y``, which is
        singular whenever some output is a function of the earlier ones.
        """
        Ky_pinv = np.linalg.pinv(self.K_y, rcond=1e-12, hermitian=True)
        cond_cov = self.K_x - self.K_yx.T @ Ky_pinv @ self.K_yx
        _, ld_x = np.linalg.slogdet(self.K_x)
        sign, ld_c = np.linalg.slogdet(0.5 * (cond_cov + cond_cov.T))
        if sign <= 0:
            return float("inf")
        return float(0.5 * (ld_x - ld_c))


def _solve_sym(A, b, label, step=None):
    """Solve ``A X = b`` for symmetric positive definite ``A`` with a condition guard."""
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        where = f" at step {step}" if step is not None else ""
        raise SingularBlockError(f"{label} is singular or ill-conditioned (cond={cond:.3g}){where}", step)
    try:
        return sla.solve(A, b, assume_a="pos")
    except (np.linalg.LinAlgError, sla.LinAlgError):
        return sla.solve(A, b, assume_a="sym")


def _solve_consistent(M, b, label, step):
    """Solve ``M c = b`` for symmetric PSD ``M`` that may be singular.

    A singular ``M`` arises when an earlier output is a deterministic function
    of the outputs before it (its constraint was inactive). Any solution of a
    consistent system then gives the same covariances, so the minimum-norm
    one is used.
    """
    cond = np.linalg.cond(M)
    if np.isfinite(cond) and cond <= COND_LIMIT:
        return sla.solve(M, b, assume_a="sym")
    c = np.linalg.pinv(M, rcond=1e-12, hermitian=True) @ b
    resid = np.max(np.abs(M @ c - b)) / max(1.0, float(np.max(np.abs(b))))
    if resid > 1e-9:
        raise SingularBlockError(f"{label} is singular and the system is inconsistent at step {step}", step)
    return c


def procedure1(sched: GmSchedule) -> GmRealization:
    """Second-order statistics of the unique SRDF realization.

    Builds ``K_y`` and ``K_yx`` one sample at a time; ``k`` below is the
    1-based sample index, ``i = k - 1`` its 0-based position.
    """
    Kx = sched.source_covariance()
    d = effective_distortions(sched)
    n = sched.length
    Ky = np.zeros((n, n))
    Kyx = np.zeros((n, n))

    # Step 0
    Ky[0, 0] = Kyx[0, 0] = Kx[0, 0] - d[0]

    for i in range(1, n):
        k = i + 1
        # Step 2: E[y^{k-1} x_k]
        gain = _solve_sym(Kx[:i, :i], Kyx[:i, :i].T, "K_x block", step=k).T
        e = gain @ Kx[:i, i]
        # Steps 3-5
        Ky[:i, i] = Ky[i, :i] = e
        Ky[i, i] = Kyx[i, i] = Kx[i, i] - d[i]
        # Step 6: y_k depends on x^{k-1} only through (y^{k-1}, x_k)
        M = np.empty((k, k))
        M[:i, :i] = Ky[:i, :i]
        M[:i, i] = M[i, :i] = e
        M[i, i] = Kx[i, i]
        rhs = np.vstack([Kyx[:i, :i], Kx[i, :i][None, :]])
        y_k_cross = np.r_[e, Kx[i, i] - d[i]]
        coeffs = _solve_consistent(M, y_k_cross, "cov(y^{k-1}, x_k)", step=k)
        # Step 7
        Kyx[i, :i] = coeffs @ rhs
        Kyx[:i, i] = e

    return GmRealization(Kx, Ky, Kyx, d)


def realization_residuals(real: GmRealization) -> dict[str, float]:
    """Max violations of the conditions that pin down the realization.

    ``causality``: strictly upper part of K_yx K_x^{-1}.
    ``mse``: per-sample error variance against d_k.
    ``triangular``: upper triangles of K_y and K_yx must agree.
    ``past_independence``: y_k must depend on x^{k-1} only through
    (y^{k-1}, x_k), checked by recomputing every row below the diagonal.
    """
    T = real.estimator_matrix()
    Ky, Kyx, Kx = real.K_y, real.K_yx, real.K_x
    n = real.length
    iu = np.triu_indices(n)
    past = 0.0
    for i in range(1, n):
        k = i + 1
        M = np.empty((k, k))
        M[:i, :i] = Ky[:i, :i]
        M[:i, i] = M[i, :i] = Kyx[:i, i]
        M[i, i] = Kx[i, i]
        coeffs = np.linalg.pinv(M, rcond=1e-12, hermitian=True) @ np.r_[Ky[:i, i], Kyx[i, i]]
        pred = coeffs @ np.vstack([Kyx[:i, :i], Kx[i, :i][None, :]])
        past = max(past, float(np.max(np.abs(pred - Kyx[i, :i]))))
    return {
        "causality": float(np.max(np.abs(np.triu(T, 1)))) if n > 1 else 0.0,
        "mse": float(np.max(np.abs(real.error_variances() - real.d))),
        "triangular": float(np.max(np.abs(Ky[iu] - Kyx[iu]))),
        "past_independence": past,
        "symmetry": float(np.max(np.abs(Ky - Ky.T))),
    }


@dataclass(frozen=True)
class VectorChannel:
    A_mat: NDArray
    B_mat: NDArray

    def apply(self, x: NDArray, noise: NDArray) -> NDArray:
        """Columns of ``x`` and ``noise`` are independent draws."""
        return self.B_mat @ (self.A_mat @ x + noise)


def semidefinite_cholesky(M: NDArray, tol: float = 1e-12) -> NDArray:
    """Lower-triangular L with L L^T = M for symmetric PSD (possibly singular) M.

    Columns whose pivot falls below ``tol * max(diag)`` are set to zero.
    """
    n = M.shape[0]
    L = np.zeros_like(M, dtype=float)
    scale = max(float(np.max(np.abs(np.diag(M)))), 1e-300)
    for j in range(n):
        piv = M[j, j] - L[j, :j] @ L[j, :j]
        if piv <= tol * scale:
            continue
        L[j, j] = np.sqrt(piv)
        L[j + 1 :, j] = (M[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def _clip_psd(M):
    M = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(M)
    if np.min(vals) < EIG_CLIP * max(1.0, float(np.max(np.abs(vals)))):
        raise DomainError(f"innovation covariance has eigenvalue {np.min(vals):.3g}; not a valid realization")
    if np.min(vals) >= 0:
        return M
    vals = np.maximum(vals, 0.0)
    return (vecs * vals) @ vecs.T


def vector_channel(real: GmRealization) -> VectorChannel:
    """Matrices A, B with ``B A = K_yx K_x^{-1}`` and ``B B^T = K_y - K_yx K_x^{-1} K_xy``."""
    T = real.estimator_matrix()
    M = _clip_psd(real.K_y - T @ real.K_yx.T)
    try:
        B = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        B = semidefinite_cholesky(M)
    A = np.linalg.pinv(B) @ T
    miss = np.max(np.abs(B @ A - T)) / max(1.0, float(np.max(np.abs(T))))
    if miss > SPAN_TOL:
        raise DomainError(f"column span of K_yx not contained in span of B (residual {miss:.3g})")
    return VectorChannel(A, B)
