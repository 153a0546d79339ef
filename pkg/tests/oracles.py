"""Independent brute-force oracles used by the test suite.

Everything here is deliberately written as plain, slow, straight-line
numpy so it shares no code path with the package under test.
"""

import numpy as np


def lasso_objective(D, x, a, lam):
    """||x - D a||^2 + lam * ||a||_1, exactly as defined."""
    r = x - D @ a
    return float(r @ r + lam * np.abs(a).sum())


def lasso_cd(D, x, lam, tol=1e-10, max_sweeps=100000):
    """Cyclic coordinate descent for min ||x - D a||^2 + lam ||a||_1.

    Runs until the largest single-coordinate update in a sweep is below
    ``tol``. Columns of D with zero norm keep a zero coefficient.
    """
    d, n_atoms = D.shape
    gram = D.T @ D
    corr = D.T @ x
    diag = np.diag(gram).copy()
    a = np.zeros(n_atoms)
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(n_atoms):
            if diag[j] <= 0.0:
                continue
            # residual correlation with coordinate j removed
            rho = corr[j] - gram[j] @ a + diag[j] * a[j]
            new = np.sign(rho) * max(abs(rho) - lam / 2.0, 0.0) / diag[j]
            delta = max(delta, abs(new - a[j]))
            a[j] = new
        if delta < tol:
            break
    return a


def dict_update_pg(X, A, D0, n_iter=20000, rel_tol=1e-12):
    """Projected gradient for min_D ||X - D A||_F^2 s.t. column norms <= 1."""
    D = D0.copy()
    lip = 2.0 * np.linalg.norm(A @ A.T, 2)
    if lip == 0.0:
        return D
    step = 1.0 / lip
    prev = np.inf
    for _ in range(n_iter):
        grad = -2.0 * (X - D @ A) @ A.T
        D = D - step * grad
        norms = np.linalg.norm(D, axis=0)
        over = norms > 1.0
        D[:, over] /= norms[over]
        obj = float(np.linalg.norm(X - D @ A, "fro") ** 2)
        if prev - obj < rel_tol * max(1.0, abs(prev)):
            break
        prev = obj
    return D


def knn_brute(columns, z, k):
    """Exhaustive K nearest columns by Euclidean distance, ties by index.

    ``columns`` is a d x n matrix; returns indices ordered by
    (distance, index).
    """
    diffs = columns - z[:, None]
    dists = np.sqrt((diffs * diffs).sum(axis=0))
    order = sorted(range(columns.shape[1]), key=lambda i: (dists[i], i))
    return np.asarray(order[: min(k, columns.shape[1])], dtype=np.intp)


def max_pool_loops(A, indices):
    """Per-row maximum over the selected columns, computed with loops."""
    D = A.shape[0]
    out = np.zeros(D)
    if len(indices) == 0:
        return out
    for r in range(D):
        best = -np.inf
        for i in indices:
            if A[r, i] > best:
                best = A[r, i]
        out[r] = best
    return out


def lccrc_dense(pond_cols, pond_classes, Z, z_levels, k, lam, n_classes):
    """Straight-line LC-CRC: normalize, exhaustive KNN, dense ridge,
    per-class residuals from the embedded coefficient vector, per-level
    minima summed per class.

    Returns (predicted class, r array of length n_classes).
    """
    Y = pond_cols / np.linalg.norm(pond_cols, axis=0, keepdims=True)
    n_pond = Y.shape[1]
    k = min(k, n_pond)
    m_cols = Z.shape[1]
    errors = np.zeros((n_classes, m_cols))
    for m in range(m_cols):
        z = Z[:, m] / np.linalg.norm(Z[:, m])
        H = knn_brute(Y, z, k)
        Yk = Y[:, H]
        coef = np.linalg.solve(Yk.T @ Yk + lam * np.eye(k), Yk.T @ z)
        a_full = np.zeros(n_pond)
        a_full[H] = coef
        for c in range(n_classes):
            mask = pond_classes == c
            recon = Y[:, mask] @ a_full[mask]
            errors[c, m] = np.linalg.norm(z - recon)
    r = np.zeros(n_classes)
    for lvl in sorted(set(z_levels)):
        cols = [m for m in range(m_cols) if z_levels[m] == lvl]
        for c in range(n_classes):
            r[c] += min(errors[c, m] for m in cols)
    return int(np.argmin(r)), r
