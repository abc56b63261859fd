"""Closed-form and quadrature computations on 2D Gaussians.

Everything here is a pure function of immutable inputs. Covariances are
checked with a Cholesky factorization and a condition-number bound; no
silent regularization is applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))
MAX_CONDITION = 1e8
DEFAULT_NODES = 7


class InvalidDistributionError(ValueError):
    """Raised for covariances that are not symmetric positive definite."""


def _check_cov(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or not np.all(np.isfinite(cov)):
        raise InvalidDistributionError(f"covariance must be a finite 2x2 matrix, got {cov!r}")
    if abs(cov[0, 1] - cov[1, 0]) > 1e-12:
        raise InvalidDistributionError("covariance is not symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidDistributionError("covariance is not positive definite") from exc
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 0.0 or eig[1] / eig[0] > MAX_CONDITION:
        raise InvalidDistributionError(
            f"covariance condition number exceeds {MAX_CONDITION:g} (eigenvalues {eig})"
        )
    return chol


@dataclass(frozen=True, eq=False)
class Gaussian2:
    """Bivariate normal with mean in meters and covariance in square meters."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(2)
        cov = np.array(self.cov, dtype=float).reshape(2, 2)
        chol = _check_cov(cov)
        mean.flags.writeable = False
        cov.flags.writeable = False
        chol.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of the covariance."""
        return self._chol

    def flexibility(self) -> float:
        """Willingness to deviate from the mean, measured as trace of the covariance."""
        return float(self.cov[0, 0] + self.cov[1, 1])

    def __eq__(self, other):
        if not isinstance(other, Gaussian2):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)

    def __repr__(self):
        return f"Gaussian2(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


def log_density(g: Gaussian2, x) -> float:
    """Log of the normal density of ``g`` evaluated at the point ``x``."""
    diff = np.asarray(x, dtype=float) - g.mean
    u = np.linalg.solve(g.chol, diff)
    logdet = 2.0 * np.sum(np.log(np.diag(g.chol)))
    return float(-LOG_2PI - 0.5 * logdet - 0.5 * u @ u)


def kl_divergence(p: Gaussian2, q: Gaussian2) -> float:
    """KL(p || q) between two bivariate normals.

    Non-negative and zero only when ``p == q``; not symmetric.
    """
    q_inv = np.linalg.inv(q.cov)
    dmu = q.mean - p.mean
    logdet_q = 2.0 * np.sum(np.log(np.diag(q.chol)))
    logdet_p = 2.0 * np.sum(np.log(np.diag(p.chol)))
    val = 0.5 * (np.trace(q_inv @ p.cov) + dmu @ q_inv @ dmu - 2.0 + logdet_q - logdet_p)
    # round-off can leave a tiny negative value for identical inputs
    return float(max(val, 0.0))


def overlap(p: Gaussian2, q: Gaussian2) -> float:
    """Inner product of two Gaussian densities, the integral of p(x) q(x) dx.

    Equal to the density of N(0, cov_p + cov_q) at mean_p - mean_q.
    """
    s = p.cov + q.cov
    d = p.mean - q.mean
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    quad = (s[1, 1] * d[0] ** 2 - 2.0 * s[0, 1] * d[0] * d[1] + s[0, 0] * d[1] ** 2) / det
    return float(np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det)))


@lru_cache(maxsize=None)
def hermite_grid(n_nodes: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product Gauss-Hermite nodes for a standard bivariate normal.

    Returns ``(nodes, weights)`` with nodes of shape (n**2, 2) already scaled
    by sqrt(2), and weights normalized to sum to one, so that
    ``sum(w * f(mu + L @ node))`` approximates E[f] under N(mu, L L^T).
    """
    z, w = np.polynomial.hermite.hermgauss(n_nodes)
    w = w / np.sqrt(np.pi)
    zz = np.sqrt(2.0) * np.stack(np.meshgrid(z, z, indexing="ij"), axis=-1).reshape(-1, 2)
    ww = np.outer(w, w).reshape(-1)
    zz.flags.writeable = False
    ww.flags.writeable = False
    return zz, ww


@lru_cache(maxsize=None)
def mirror_pairs(n_nodes: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Indices into :func:`hermite_grid` pairing each node with its x-reflection.

    Returns ``(neg, pos, mid)``: ``nodes[pos[i]]`` is ``nodes[neg[i]]`` with
    the first coordinate negated, and ``mid`` lists nodes on the reflection
    axis. Summing quadrature terms pair by pair makes the rounding of the
    sum invariant under reflecting the integrand.
    """
    i, j = np.meshgrid(np.arange(n_nodes), np.arange(n_nodes), indexing="ij")
    i, j = i.ravel(), j.ravel()
    partner = (n_nodes - 1 - i) * n_nodes + j
    k = np.arange(n_nodes * n_nodes)
    neg, mid = k[2 * i < n_nodes - 1], k[2 * i == n_nodes - 1]
    return neg, partner[neg], mid


def paired_quadrature_sum(values: np.ndarray, n_nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Weighted sum over the node axis (axis 1) of ``values``, reflection-paired."""
    _, weights = hermite_grid(n_nodes)
    neg, pos, mid = mirror_pairs(n_nodes)
    folded = values[:, neg] + values[:, pos]
    return np.tensordot(folded, weights[neg], axes=([1], [0])) + np.tensordot(
        values[:, mid], weights[mid], axes=([1], [0])
    )


def quadrature_points(g: Gaussian2, n_nodes: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature abscissae mapped through ``g`` and their weights."""
    nodes, weights = hermite_grid(n_nodes)
    return g.mean + nodes @ g.chol.T, weights


def expect(g: Gaussian2, f: Callable, n_nodes: int = DEFAULT_NODES, vectorized: bool = False) -> float:
    """Gauss-Hermite estimate of E_g[f(x)].

    Exact for polynomial integrands of degree up to ``2 * n_nodes - 1`` per
    axis. With ``vectorized=True``, ``f`` receives all nodes as an (N, 2)
    array and must return N values.
    """
    pts, weights = quadrature_points(g, n_nodes)
    if vectorized:
        vals = np.asarray(f(pts), dtype=float)
    else:
        vals = np.array([f(p) for p in pts], dtype=float)
    return float(weights @ vals)


@dataclass(frozen=True)
class CovParam:
    """Unconstrained log-Cholesky coordinates of a 2x2 SPD matrix."""

    l11: float
    l21: float
    l22: float

    def as_array(self) -> np.ndarray:
        return np.array([self.l11, self.l21, self.l22])


def encode_cov(cov) -> CovParam:
    cov = np.asarray(cov, dtype=float)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidDistributionError("cannot encode a non-SPD covariance") from exc
    if abs(cov[0, 1] - cov[1, 0]) > 1e-12:
        raise InvalidDistributionError("cannot encode a non-symmetric covariance")
    return CovParam(float(np.log(chol[0, 0])), float(chol[1, 0]), float(np.log(chol[1, 1])))


def decode_cov(p) -> np.ndarray:
    """Map log-Cholesky coordinates (a CovParam or 3-vector) to a covariance."""
    l11, l21, l22 = p.as_array() if isinstance(p, CovParam) else np.asarray(p, dtype=float)
    a, c = np.exp(l11), np.exp(l22)
    return np.array([[a * a, a * l21], [a * l21, l21 * l21 + c * c]])


# Batched helpers used by the planners. Arrays carry a leading step axis.

def chol_from_params(params: np.ndarray) -> np.ndarray:
    """(n, 3) log-Cholesky rows -> (n, 2, 2) lower factors."""
    n = params.shape[0]
    L = np.zeros((n, 2, 2))
    L[:, 0, 0] = np.exp(params[:, 0])
    L[:, 1, 0] = params[:, 1]
    L[:, 1, 1] = np.exp(params[:, 2])
    return L


def params_from_chol(L: np.ndarray) -> np.ndarray:
    return np.stack([np.log(L[:, 0, 0]), L[:, 1, 0], np.log(L[:, 1, 1])], axis=1)


def chol_grad_to_params(dL: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. the lower factor entries to log-Cholesky params."""
    return np.stack([dL[:, 0, 0] * L[:, 0, 0], dL[:, 1, 0], dL[:, 1, 1] * L[:, 1, 1]], axis=1)


def batch_kl(mu, L, mu_bar, cov_bar_inv, logdet_bar):
    """Per-step KL(N(mu, L L^T) || N(mu_bar, cov_bar)) with gradients.

    Returns ``(kl, d_mu, d_L)``; ``d_L`` holds the gradient with respect to the
    lower factor (upper entry zero).
    """
    cov = L @ np.swapaxes(L, 1, 2)
    diff = mu - mu_bar
    a_diff = np.einsum("nij,nj->ni", cov_bar_inv, diff)
    tr = np.einsum("nij,nji->n", cov_bar_inv, cov)
    logdet = 2.0 * (np.log(L[:, 0, 0]) + np.log(L[:, 1, 1]))
    kl = 0.5 * (tr + np.einsum("ni,ni->n", diff, a_diff) - 2.0 + logdet_bar - logdet)
    d_L = cov_bar_inv @ L
    d_L[:, 0, 0] -= 1.0 / L[:, 0, 0]
    d_L[:, 1, 1] -= 1.0 / L[:, 1, 1]
    d_L[:, 0, 1] = 0.0
    return kl, a_diff, d_L


def batch_overlap(mu_a, L_a, mu_b, L_b):
    """Per-step overlap of two Gaussian sequences with gradients.

    Returns ``(value, d_mu_a, d_L_a, d_L_b)``; the gradient w.r.t. ``mu_b`` is
    ``-d_mu_a``.
    """
    s = L_a @ np.swapaxes(L_a, 1, 2) + L_b @ np.swapaxes(L_b, 1, 2)
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    s_inv = np.empty_like(s)
    s_inv[:, 0, 0] = s[:, 1, 1] / det
    s_inv[:, 1, 1] = s[:, 0, 0] / det
    s_inv[:, 0, 1] = -s[:, 0, 1] / det
    s_inv[:, 1, 0] = -s[:, 1, 0] / det
    d = mu_a - mu_b
    u = np.einsum("nij,nj->ni", s_inv, d)
    val = np.exp(-0.5 * np.einsum("ni,ni->n", d, u)) / (2.0 * np.pi * np.sqrt(det))
    d_mu_a = -val[:, None] * u
    G = 0.5 * val[:, None, None] * (np.einsum("ni,nj->nij", u, u) - s_inv)
    d_L_a = 2.0 * G @ L_a
    d_L_b = 2.0 * G @ L_b
    d_L_a[:, 0, 1] = 0.0
    d_L_b[:, 0, 1] = 0.0
    return val, d_mu_a, d_L_a, d_L_b
