"""Small dense kernels used by the geometry and mapping layers.

Three solvers, all written out here rather than imported, because the exact
values they produce back certificates:

* one-sided Jacobi SVD for singular values of desk-size matrices,
* Wolfe's min-norm-point algorithm over a convex hull of points,
* a Lawson-Hanson style active-set solver for nonnegative quadratic programs,
  which yields exact Euclidean projections onto half-space polyhedra and
  finitely generated cones via their duals.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "jacobi_singular_values",
    "smallest_singular_value",
    "min_norm_point",
    "nnqp_minimize",
    "project_polyhedron",
    "cone_least_squares",
]


def jacobi_singular_values(mat: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Singular values of ``mat`` by one-sided Jacobi rotations.

    Columns are rotated pairwise until all are mutually orthogonal to relative
    tolerance ``tol``; the singular values are then the column norms.  Returns
    them sorted in decreasing order, one per column (rank-deficient and wide
    matrices simply produce zero columns).

    Parameters
    ----------
    mat : (m, n) array.
    tol : orthogonality threshold on |a_i . a_j| / (|a_i| |a_j|).
    max_sweeps : cap on full column sweeps.
    """
    b = np.array(mat, dtype=float, copy=True)
    if b.ndim != 2:
        raise ValueError("need a 2-d matrix")
    _, n = b.shape
    if n == 0:
        return np.zeros(0)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                col_i = b[:, i].copy()
                col_j = b[:, j].copy()
                gamma = float(col_i @ col_j)
                alpha = float(col_i @ col_i)
                beta = float(col_j @ col_j)
                if alpha == 0.0 or beta == 0.0:
                    continue
                if abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                # classic stable rotation angle
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta == 0.0:
                    t = 1.0
                elif abs(zeta) > 1e150:  # avoid overflow in zeta*zeta
                    t = 1.0 / (2.0 * zeta)
                else:
                    t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                b[:, i] = c * col_i - s * col_j
                b[:, j] = s * col_i + c * col_j
                rotated = True
        if not rotated:
            break
    sigma = np.sqrt(np.sum(b * b, axis=0))
    sigma.sort()
    return sigma[::-1]


def smallest_singular_value(mat: np.ndarray, tol: float = 1e-12) -> float:
    """min_{|u|_2 = 1} |mat u|_2, i.e. the n-th singular value of an (m, n) matrix."""
    return float(jacobi_singular_values(mat, tol=tol)[-1])


def min_norm_point(points: np.ndarray, tol: float = 1e-12, max_iter: int = 1000):
    """Point of minimum Euclidean norm in conv{points}, by Wolfe's algorithm.

    Parameters
    ----------
    points : (k, n) array of generators.
    tol : termination tolerance on the optimality gap.

    Returns
    -------
    (x, coeffs) : the min-norm point (n,) and hull coefficients (k,) with
    coeffs >= 0, sum = 1, coeffs @ points = x.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("need a nonempty (k, n) point array")
    k, _ = pts.shape
    norms2 = np.sum(pts * pts, axis=1)
    start = int(np.argmin(norms2))
    corral = [start]
    lam = np.array([1.0])
    x = pts[start].copy()
    scale = float(np.sqrt(max(norms2.max(), 1.0)))
    for _ in range(max_iter):
        # most opposed generator to the current point
        dots = pts @ x
        best = int(np.argmin(dots))
        if dots[best] >= float(x @ x) - tol * scale * max(float(np.linalg.norm(x)), tol):
            break
        if best in corral:
            break
        corral.append(best)
        lam = np.append(lam, 0.0)
        while True:
            sub = pts[corral]
            m = len(corral)
            # affine min-norm point over the corral: KKT system
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = sub @ sub.T
            kkt[:m, m] = 1.0
            kkt[m, :m] = 1.0
            rhs = np.zeros(m + 1)
            rhs[m] = 1.0
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            mu = sol[:m]
            if np.all(mu > tol):
                lam = mu
                x = mu @ sub
                break
            # step toward the affine minimizer keeping convex coefficients
            diff = lam - mu
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(diff > tol, lam / diff, np.inf)
            theta = min(1.0, float(np.min(ratios)))
            lam = (1.0 - theta) * lam + theta * mu
            lam[lam < tol] = 0.0
            keep = lam > 0.0
            if keep.all():
                x = lam @ sub
                break
            corral = [c for c, kf in zip(corral, keep) if kf]
            lam = lam[keep]
            s = lam.sum()
            lam = lam / s if s > 0 else np.full(len(corral), 1.0 / len(corral))
    coeffs = np.zeros(k)
    for c, l in zip(corral, lam):
        coeffs[c] += l
    return pts.T @ coeffs, coeffs


def nnqp_minimize(quad: np.ndarray, lin: np.ndarray, tol: float = 1e-11, max_iter: int | None = None) -> np.ndarray:
    """argmin_{lam >= 0} (1/2) lam' quad lam - lin' lam  for PSD quad.

    Lawson-Hanson active-set iteration on the positivity constraints; finite
    termination in exact arithmetic, iteration-capped here.  Singular
    subproblems fall back to least squares, which is the standard treatment
    for duplicated rows at this scale.
    """
    q = np.asarray(quad, dtype=float)
    c = np.asarray(lin, dtype=float)
    m = c.shape[0]
    if max_iter is None:
        max_iter = 50 * max(m, 1) + 50
    lam = np.zeros(m)
    passive: list[int] = []
    scale = max(float(np.abs(q).max() if q.size else 0.0), float(np.abs(c).max() if c.size else 0.0), 1.0)
    for _ in range(max_iter):
        grad = q @ lam - c
        candidates = [i for i in range(m) if i not in passive and grad[i] < -tol * scale]
        if not candidates:
            return lam
        passive.append(min(candidates, key=lambda i: grad[i]))
        for _inner in range(4 * m + 8):
            sub_q = q[np.ix_(passive, passive)]
            sub_c = c[passive]
            trial, *_ = np.linalg.lstsq(sub_q, sub_c, rcond=None)
            residual = sub_q @ trial - sub_c
            if np.linalg.norm(residual) > 10 * tol * scale * max(len(passive), 1):
                # face system inconsistent (dependent rows): descend along a
                # null direction of the face Hessian until a coefficient hits 0
                _, svals, vt = np.linalg.svd(sub_q)
                cutoff = max(svals[0], 1.0) * 1e-12
                null = vt[svals < cutoff if svals.size else []]
                if null.size == 0:
                    lam = np.zeros(m)
                    lam[passive] = np.maximum(trial, 0.0)
                    break
                nu = null.T @ (null @ sub_c)
                nu_norm = np.linalg.norm(nu)
                if nu_norm <= tol * scale:
                    lam = np.zeros(m)
                    lam[passive] = np.maximum(trial, 0.0)
                    break
                nu /= nu_norm
                cur = lam[passive]
                neg = nu < -tol
                if not neg.any():
                    # would mean an unbounded dual, i.e. empty primal
                    raise ValueError("nonnegative QP is unbounded below")
                step = float(np.min(cur[neg] / -nu[neg]))
                cur = cur + step * nu
                cur[cur < tol] = 0.0
            elif np.all(trial > tol):
                lam = np.zeros(m)
                lam[passive] = trial
                break
            else:
                cur = lam[passive]
                diff = cur - trial
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(diff > tol, cur / diff, np.inf)
                theta = min(max(float(np.min(ratios)), 0.0), 1.0)
                cur = (1.0 - theta) * cur + theta * trial
                cur[cur < tol] = 0.0
            lam = np.zeros(m)
            lam[passive] = cur
            passive = [i for i in passive if lam[i] > 0.0]
            if not passive:
                break
    return lam


def project_polyhedron(point: np.ndarray, a_mat: np.ndarray, b_vec: np.ndarray, tol: float = 1e-11) -> np.ndarray:
    """Euclidean projection of ``point`` onto {x : a_mat x <= b_vec}.

    Solved through the dual nonnegative QP; assumes the polyhedron is
    nonempty (checked by the caller).
    """
    y = np.asarray(point, dtype=float)
    a = np.asarray(a_mat, dtype=float)
    b = np.asarray(b_vec, dtype=float)
    slack = a @ y - b
    if np.all(slack <= tol):
        return y.copy()
    lam = nnqp_minimize(a @ a.T, slack, tol=tol)
    return y - a.T @ lam


def cone_least_squares(target: np.ndarray, gens: np.ndarray, tol: float = 1e-11) -> np.ndarray:
    """argmin_{lam >= 0} |gens' lam - target|_2 for generators as rows of ``gens``."""
    g = np.asarray(gens, dtype=float)
    t = np.asarray(target, dtype=float)
    return nnqp_minimize(g @ g.T, g @ t, tol=tol)
