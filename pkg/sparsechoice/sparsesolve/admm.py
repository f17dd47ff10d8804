"""ADMM for weighted L1 minimisation inside a Euclidean residual ball.

The problem ``min sum(w * |x|) s.t. ||A x - o||_2 <= pi`` is split as

    min  g(y) + I_B(z)   s.t.  [A; I] x = [z; y]

with ``g`` the weighted L1 norm and ``B`` the ball of radius ``pi`` around ``o``.
The x-update solves ``(A^T A + I) x = A^T (z - u) + (y - v)`` whose matrix does
not depend on rho, so it is factorised once.  For wide libraries (more columns
than rows) the J x J matrix ``I + A A^T`` is factorised instead and the update
goes through the Woodbury identity.  Duals are kept in scaled form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from sparsechoice.config import SolverSettings

logger = logging.getLogger(__name__)

RHO_PERIOD = 10
RHO_MU = 10.0
RHO_TAU = 2.0
POLISH_MAX_COND = 1e12


@dataclass
class AdmmState:
    x: np.ndarray
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    rho: float


def soft_threshold(v: np.ndarray, t: np.ndarray | float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_ball(v: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    d = v - center
    n = np.linalg.norm(d)
    if n <= radius:
        return v
    return center + d * (radius / n)


def normal_solver(A: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``b -> (A^T A + I)^{-1} b`` using the smaller of the two factorisations."""

    J, n = A.shape
    if n <= J:
        factor = linalg.cho_factor(A.T @ A + np.eye(n))
        return lambda b: linalg.cho_solve(factor, b)
    # (I + A^T A)^{-1} = I - A^T (I + A A^T)^{-1} A
    small = linalg.cho_factor(A @ A.T + np.eye(J))
    return lambda b: b - A.T @ linalg.cho_solve(small, A @ b)


def admm(A: np.ndarray, o: np.ndarray, pi: float, weights: np.ndarray, settings: SolverSettings) -> AdmmState:
    J, n = A.shape
    solve = normal_solver(A)
    rho = settings.rho
    alpha = settings.over_relaxation

    x = np.zeros(n)
    y = np.zeros(n)
    z = project_ball(np.zeros(J), o, pi)
    u = np.zeros(J)
    v = np.zeros(n)
    r_pri = r_dual = np.inf
    sqrt_pri = np.sqrt(J + n)
    sqrt_dual = np.sqrt(n)

    for it in range(1, settings.max_iterations + 1):
        x = solve(A.T @ (z - u) + (y - v))
        Ax = A @ x
        z_old, y_old = z, y
        # over-relaxed copies feed the z/y and dual updates; residuals use the plain ones
        Ax_hat = alpha * Ax + (1.0 - alpha) * z_old
        x_hat = alpha * x + (1.0 - alpha) * y_old
        z = project_ball(Ax_hat + u, o, pi)
        y = soft_threshold(x_hat + v, weights / rho)
        u = u + Ax_hat - z
        v = v + x_hat - y

        r_pri = float(np.sqrt(np.sum((Ax - z) ** 2) + np.sum((x - y) ** 2)))
        r_dual = float(rho * np.linalg.norm(A.T @ (z - z_old) + (y - y_old)))
        eps_pri = sqrt_pri * settings.eps_abs + settings.eps_rel * max(
            np.sqrt(Ax @ Ax + x @ x), np.sqrt(z @ z + y @ y)
        )
        eps_dual = sqrt_dual * settings.eps_abs + settings.eps_rel * rho * np.linalg.norm(A.T @ u + v)
        if r_pri <= eps_pri and r_dual <= eps_dual:
            return AdmmState(y, it, True, r_pri, r_dual, rho)

        if settings.adaptive_rho and it % RHO_PERIOD == 0:
            new_rho = rho
            if r_pri > RHO_MU * r_dual:
                new_rho = min(rho * RHO_TAU, settings.rho_max)
            elif r_dual > RHO_MU * r_pri:
                new_rho = max(rho / RHO_TAU, settings.rho_min)
            if new_rho != rho:
                # scaled duals follow rho
                u = u * (rho / new_rho)
                v = v * (rho / new_rho)
                rho = new_rho

    logger.debug("ADMM stopped at max_iterations=%d (r_pri=%.3g r_dual=%.3g)", settings.max_iterations, r_pri, r_dual)
    return AdmmState(y, settings.max_iterations, False, r_pri, r_dual, rho)


def active_mask(x: np.ndarray, threshold: float) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    return np.abs(x) > threshold * scale


def polish(
    A: np.ndarray,
    o: np.ndarray,
    pi: float,
    weights: np.ndarray,
    x: np.ndarray,
    threshold: float,
) -> np.ndarray | None:
    """Exact optimum on the support and sign pattern of ``x``.

    With signs fixed the objective is linear, so the minimiser over the ball is the
    support least-squares point moved against ``G^-1 (w * sign)`` until the residual
    reaches ``pi``.  Returns ``None`` when the candidate is unusable.
    """

    support = active_mask(x, threshold)
    size = int(support.sum())
    if size == 0 or size > A.shape[0]:
        return None
    As = A[:, support]
    sigma = np.sign(x[support])
    ws = weights[support] * sigma
    G = As.T @ As
    if np.linalg.cond(G) > POLISH_MAX_COND:
        return None
    try:
        factor = linalg.cho_factor(G)
    except linalg.LinAlgError:
        return None
    x_ls = linalg.cho_solve(factor, As.T @ o)
    r_ls = o - As @ x_ls
    slack = pi * pi - float(r_ls @ r_ls)
    if slack < 0:
        return None
    g = linalg.cho_solve(factor, ws)
    q = float(ws @ g)
    if q <= 0:
        return None
    xs = x_ls - np.sqrt(slack / q) * g
    if np.any(np.sign(xs) != sigma):
        return None
    out = np.zeros_like(x)
    out[support] = xs
    return out


def restore_feasibility(A: np.ndarray, o: np.ndarray, pi: float, x: np.ndarray, threshold: float) -> np.ndarray:
    """Move ``x`` toward a least-squares point until ``||A x - o|| <= pi``.

    The support least-squares point is tried first so sparsity survives; the full
    least-squares point (feasible whenever ``pi`` is) is the fallback anchor.
    """

    r = A @ x - o
    if np.linalg.norm(r) <= pi:
        return x
    support = active_mask(x, threshold)
    anchors = []
    if support.any():
        xs, *_ = linalg.lstsq(A[:, support], o)
        anchor = np.zeros_like(x)
        anchor[support] = xs
        anchors.append(anchor)
    full, *_ = linalg.lstsq(A, o)
    anchors.append(full)

    for anchor in anchors:
        r_anchor = A @ anchor - o
        if np.linalg.norm(r_anchor) > pi:
            continue
        # largest s in [0, 1] with ||r_anchor + s (r - r_anchor)|| <= pi
        d = r - r_anchor
        a = float(d @ d)
        b = float(r_anchor @ d)
        c = float(r_anchor @ r_anchor) - pi * pi
        s = (-b + np.sqrt(max(b * b - a * c, 0.0))) / a if a > 0 else 0.0
        s = min(max(s, 0.0), 1.0)

        def feasible(t: float) -> bool:
            return bool(np.linalg.norm(A @ (anchor + t * (x - anchor)) - o) <= pi)

        if not feasible(s):
            # round-off at the boundary; bisect between the anchor (s=0) and s
            lo, hi = 0.0, s
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
            s = lo
        return anchor + s * (x - anchor)
    return x
