"""Numerical self-checks: closed forms against independent oracles.

Each check returns a :class:`Check` with the measured error and its
tolerance. Library functions are looked up through their modules at call
time, so a patched (faulty) implementation is caught.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gaussian as G
from . import safety as S
from .optimize import check_gradient, jacobian_fd
from .planners import PROBLEMS
from .scenario import Scenario

KL_TOL = 1e-5
OVERLAP_REL_TOL = 0.01
GRAD_TOL = 1e-4
SPD_TOL = 1e-10


@dataclass
class Check:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tolerance)


def random_gaussian(rng: np.random.Generator, eig_range=(0.25, 4.0), mean_range=1.0):
    """Gaussian with uniformly drawn eigenvalues and orientation."""
    eig = rng.uniform(*eig_range, size=2)
    th = rng.uniform(0.0, np.pi)
    r = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    cov = r @ np.diag(eig) @ r.T
    cov = 0.5 * (cov + cov.T)
    return G.Gaussian2(rng.uniform(-mean_range, mean_range, size=2), cov)


def _logpdf(x, mean, cov):
    """Reference bivariate normal log density for rows of ``x``."""
    diff = np.atleast_2d(x) - mean
    _, logdet = np.linalg.slogdet(cov)
    quad = np.einsum("ni,ij,nj->n", diff, np.linalg.inv(cov), diff)
    return -np.log(2.0 * np.pi) - 0.5 * logdet - 0.5 * quad


def kl_quadrature(p, q, n_nodes: int = 7) -> float:
    """KL(p || q) as the Gauss-Hermite expectation under p of log p - log q.

    The integrand is quadratic, so the tensor rule is exact up to rounding.
    """
    z, w = np.polynomial.hermite.hermgauss(n_nodes)
    zz = np.sqrt(2.0) * np.stack(np.meshgrid(z, z, indexing="ij"), -1).reshape(-1, 2)
    ww = np.outer(w, w).ravel() / np.pi
    pts = p.mean + zz @ np.linalg.cholesky(p.cov).T
    return float(ww @ (_logpdf(pts, p.mean, p.cov) - _logpdf(pts, q.mean, q.cov)))


def overlap_monte_carlo(p, q, rng: np.random.Generator, n_samples: int = 1_000_000) -> float:
    """E_p[q(x)] estimated from samples of p."""
    x = p.mean + rng.standard_normal((n_samples, 2)) @ np.linalg.cholesky(p.cov).T
    return float(np.mean(np.exp(_logpdf(x, q.mean, q.cov))))


def check_kl(seed: int = 42, n_pairs: int = 20) -> Check:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(n_pairs):
        p, q = random_gaussian(rng), random_gaussian(rng)
        err = max(err, abs(G.kl_divergence(p, q) - kl_quadrature(p, q)))
    return Check("kl_vs_quadrature", err, KL_TOL)


def check_overlap(seed: int = 42, n_pairs: int = 20, n_samples: int = 1_000_000) -> Check:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(n_pairs):
        p, q = random_gaussian(rng), random_gaussian(rng)
        ref = overlap_monte_carlo(p, q, rng, n_samples)
        err = max(err, abs(G.overlap(p, q) - ref) / ref)
    return Check("overlap_vs_monte_carlo", err, OVERLAP_REL_TOL)


def check_spd_roundtrip(seed: int = 42, n: int = 100) -> Check:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(n):
        cov = random_gaussian(rng).cov
        back = G.decode_cov(G.encode_cov(cov))
        err = max(err, float(np.max(np.abs(back - cov)) / np.max(np.abs(cov))))
    return Check("spd_roundtrip", err, SPD_TOL)


def _gaussian_batch(rng, n):
    mu = rng.uniform(-1.0, 1.0, size=(n, 2))
    prm = np.column_stack([rng.uniform(-1.0, 0.3, n), rng.uniform(-0.5, 0.5, n), rng.uniform(-1.0, 0.3, n)])
    return mu, prm


def gradient_checks(seed: int = 42, scenario: Scenario | None = None) -> list[Check]:
    """check_gradient on every analytic gradient the planners supply."""
    rng = np.random.default_rng(seed)
    scenario = scenario or Scenario()
    cfg = S.SafetyConfig()
    n = 6
    out = []

    # batched KL w.r.t. means and log-Cholesky parameters, through a random weighting
    mu_bar = rng.uniform(-1.0, 1.0, size=(n, 2))
    cov_bar = np.diag([0.4, 0.7])
    inv_bar = np.broadcast_to(np.linalg.inv(cov_bar), (n, 2, 2))
    logdet_bar = float(np.log(np.linalg.det(cov_bar)))
    c = rng.uniform(0.5, 1.5, n)
    mu0, prm0 = _gaussian_batch(rng, n)

    def split(z):
        return z[:2 * n].reshape(n, 2), z[2 * n:].reshape(n, 3)

    def kl_f(z):
        mu, prm = split(z)
        return float(c @ G.batch_kl(mu, G.chol_from_params(prm), mu_bar, inv_bar, logdet_bar)[0])

    def kl_g(z):
        mu, prm = split(z)
        L = G.chol_from_params(prm)
        _, d_mu, d_L = G.batch_kl(mu, L, mu_bar, inv_bar, logdet_bar)
        return np.concatenate([(c[:, None] * d_mu).ravel(), (c[:, None] * G.chol_grad_to_params(d_L, L)).ravel()])

    z0 = np.concatenate([mu0.ravel(), prm0.ravel()])
    out.append(Check("grad_batch_kl", check_gradient(kl_f, kl_g, z0), GRAD_TOL))

    # batched overlap w.r.t. both sequences
    mu1, prm1 = _gaussian_batch(rng, n)

    def split2(z):
        k = 5 * n
        return (z[:2 * n].reshape(n, 2), z[2 * n:k].reshape(n, 3),
                z[k:k + 2 * n].reshape(n, 2), z[k + 2 * n:].reshape(n, 3))

    def ov_f(z):
        ma, pa, mb, pb = split2(z)
        return float(c @ G.batch_overlap(ma, G.chol_from_params(pa), mb, G.chol_from_params(pb))[0])

    def ov_g(z):
        ma, pa, mb, pb = split2(z)
        La, Lb = G.chol_from_params(pa), G.chol_from_params(pb)
        _, d_mu, d_La, d_Lb = G.batch_overlap(ma, La, mb, Lb)
        w = c[:, None]
        return np.concatenate([(w * d_mu).ravel(), (w * G.chol_grad_to_params(d_La, La)).ravel(),
                               (-w * d_mu).ravel(), (w * G.chol_grad_to_params(d_Lb, Lb)).ravel()])

    z1 = np.concatenate([mu0.ravel(), prm0.ravel(), mu1.ravel(), prm1.ravel()])
    out.append(Check("grad_batch_overlap", check_gradient(ov_f, ov_g, z1), GRAD_TOL))

    # expected door safety near the door, where the integrand varies
    mu_d = scenario.door_center + rng.uniform(-0.6, 0.6, size=(n, 2))
    prm_d = np.column_stack([np.full(n, np.log(0.25)), rng.uniform(-0.1, 0.1, n), np.full(n, np.log(0.2))])
    radius = scenario.robot.radius

    def door_f(z):
        mu, prm = split(z)
        return float(c @ S.expected_door_safety_batch(mu, G.chol_from_params(prm), scenario, cfg, radius)[0])

    def door_g(z):
        mu, prm = split(z)
        L = G.chol_from_params(prm)
        _, d_mu, d_L = S.expected_door_safety_batch(mu, L, scenario, cfg, radius)
        return np.concatenate([(c[:, None] * d_mu).ravel(), (c[:, None] * G.chol_grad_to_params(d_L, L)).ravel()])

    z2 = np.concatenate([mu_d.ravel(), prm_d.ravel()])
    out.append(Check("grad_expected_door_safety", check_gradient(door_f, door_g, z2), GRAD_TOL))

    # signed wall distance at points near the wall blocks
    pts = scenario.door_center + rng.uniform(-1.5, 1.5, size=(n, 2))

    def wall_f(z):
        return float(c @ S.signed_wall_distance(z.reshape(n, 2), scenario)[0])

    def wall_g(z):
        return (c[:, None] * S.signed_wall_distance(z.reshape(n, 2), scenario)[1]).ravel()

    out.append(Check("grad_signed_wall_distance", check_gradient(wall_f, wall_g, pts.ravel()), GRAD_TOL))

    # the planners' full programs: objective gradients and constraint Jacobians
    for name, build in PROBLEMS.items():
        problem = build(scenario)
        z = problem.initial_point + 1e-3 * rng.standard_normal(problem.dim)
        out.append(Check(f"grad_{name}_objective", check_gradient(problem.objective, problem.gradient, z), GRAD_TOL))
        fd = jacobian_fd(problem.constraints, z)
        an = problem.jacobian(z)
        err = float(np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd))))
        out.append(Check(f"jac_{name}_constraints", err, GRAD_TOL))
    return out


def run_all(seed: int = 42, n_samples: int = 1_000_000) -> list[Check]:
    return [
        check_kl(seed),
        check_overlap(seed, n_samples=n_samples),
        check_spd_roundtrip(seed),
        *gradient_checks(seed),
    ]


def format_table(checks: list[Check]) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  {'error':>10}  {'tolerance':>10}  result"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {c.error:>10.3e}  {c.tolerance:>10.1e}  {'PASS' if c.passed else 'FAIL'}")
    return "\n".join(lines)
