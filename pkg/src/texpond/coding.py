"""Sparse coding of local descriptors over a learned dictionary.

The coding problem is the l1-penalized least squares

    min_a ||x - D a||^2 + lam * ||a||_1,

solved by feature-sign search (an active-set method that maintains the
signs of the nonzero coefficients and solves an unconstrained quadratic
on the active set at every step). The dictionary update under unit
column-norm constraints is solved through its Lagrange dual. Alternating
the two yields the dictionary learner.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

from .errors import ConvergenceError, DegenerateCodesError, ValidationError

_EFFECTIVE_ZERO = 1e-14

# column-norm bound squared; atoms live in the unit ball
_NORM_BOUND_SQ = 1.0


@dataclass(frozen=True)
class Dictionary:
    """A d x D codebook whose columns (visual words) have l2 norm <= 1."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        if atoms.ndim != 2 or atoms.size == 0:
            raise ValidationError("dictionary atoms must form a nonempty 2-d matrix")
        if not np.all(np.isfinite(atoms)):
            raise ValidationError("dictionary atoms must be finite")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(norms > 1.0 + 1e-9):
            raise ValidationError(
                f"dictionary column norm {norms.max():.12f} exceeds the unit bound"
            )
        object.__setattr__(self, "atoms", atoms)

    @property
    def dim(self):
        """Descriptor dimension d."""
        return self.atoms.shape[0]

    @property
    def size(self):
        """Number of visual words D."""
        return self.atoms.shape[1]


@dataclass(frozen=True)
class SparseCode:
    """One coefficient vector together with the penalty it was solved at."""

    coefficients: np.ndarray
    lam: float


@dataclass(frozen=True)
class CodeMatrix:
    """Codes for a batch of descriptors; column i encodes descriptor i."""

    A: np.ndarray
    lam: float

    @property
    def n_atoms(self):
        return self.A.shape[0]

    @property
    def n_columns(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class LearnSchedule:
    """Iteration configuration for the alternating dictionary learner."""

    max_alternations: int = 30
    rel_tol: float = 1e-4
    fs_tol: float = 1e-6
    fs_max_steps: int = 1000
    pool_cap: int | None = 200_000


def _feature_sign(gram, corr, lam, tol, max_steps):
    """Active-set core. Minimizes a'Ga - 2 corr'a + lam|a|_1.

    ``gram`` = D'D and ``corr`` = D'x are precomputed so batch encoding can
    share them. Returns the coefficient vector; raises ConvergenceError
    with the best iterate attached if the step cap is exceeded.
    """
    n_atoms = gram.shape[0]
    a = np.zeros(n_atoms)
    theta = np.zeros(n_atoms, dtype=np.int8)
    active = []
    steps = 0

    while True:
        # optimality of the zero coefficients; activate the worst violator
        if active:
            grad = 2.0 * (gram[:, active] @ a[active] - corr)
        else:
            grad = -2.0 * corr
        inactive = np.nonzero(theta == 0)[0]
        if inactive.size:
            j = inactive[np.argmax(np.abs(grad[inactive]))]
            violation = abs(grad[j])
        else:
            violation = 0.0
        if violation <= lam + tol:
            return a
        theta[j] = -1 if grad[j] > 0 else 1
        active.append(j)

        # feature-sign steps until the nonzero coefficients are stationary
        prev_obj = np.inf
        stalls = 0
        while active:
            steps += 1
            if steps > max_steps:
                raise ConvergenceError(
                    f"feature-sign search exceeded {max_steps} active-set steps",
                    best=a.copy(),
                )
            idx = np.array(active)
            g_ss = gram[np.ix_(idx, idx)]
            rhs = corr[idx] - 0.5 * lam * theta[idx]
            old = a[idx]
            new = None
            try:
                cho = sla.cho_factor(g_ss, check_finite=False)
                candidate = sla.cho_solve(cho, rhs, check_finite=False)
                # near-singular Gram factors without error but solves badly
                residual = np.abs(g_ss @ candidate - rhs).max()
                if np.all(np.isfinite(candidate)) and residual <= 1e-9 * (
                    1.0 + np.abs(rhs).max()
                ):
                    new = candidate
            except np.linalg.LinAlgError:
                new = None
            if new is None:
                sol = np.linalg.lstsq(g_ss, rhs, rcond=None)[0]
                if np.abs(g_ss @ sol - rhs).max() <= 1e-9 * (1.0 + np.abs(rhs).max()):
                    new = sol
                else:
                    # Dependent atoms can leave the stationarity system
                    # inconsistent. Walk a Gram null direction (reconstruction
                    # is constant there; the dual-residual orientation shrinks
                    # the l1 norm) to the first zero crossing, which removes a
                    # coefficient from the active set.
                    null = sla.null_space(g_ss, rcond=1e-8)
                    scores = rhs @ null if null.size else np.zeros(0)
                    if scores.size and np.abs(scores).max() > 1e-12:
                        pick = int(np.argmax(np.abs(scores)))
                        direction = null[:, pick] * np.sign(scores[pick])
                        crossings = [
                            -old[i] / direction[i]
                            for i in range(idx.size)
                            if old[i] != 0.0
                            and direction[i] != 0.0
                            and -old[i] / direction[i] > 0.0
                        ]
                        if crossings:
                            new = old + min(crossings) * direction
                    if new is None:
                        # ill-conditioned but not numerically singular: use the
                        # least-squares step and let the line search sort it out
                        new = sol
            delta = new - old
            # discrete line search: the full step, every sign crossing, and
            # staying put (so the objective can never increase)
            flips = np.nonzero(np.sign(new).astype(np.int8) != theta[idx])[0]
            ts = []
            for i in flips:
                if delta[i] != 0.0:
                    t = -old[i] / delta[i]
                    if 0.0 < t <= 1.0:
                        ts.append(t)
            ts = sorted(set(ts)) + [1.0, 0.0]

            g_u = g_ss @ old
            g_d = g_ss @ delta
            quad0 = old @ g_u - 2.0 * (corr[idx] @ old)
            quad1 = 2.0 * (old @ g_d) - 2.0 * (corr[idx] @ delta)
            quad2 = delta @ g_d
            best_t, best_obj = None, np.inf
            for t in ts:
                obj = quad0 + t * quad1 + t * t * quad2
                obj += lam * np.abs(old + t * delta).sum()
                if best_t is None or obj < best_obj - 1e-15 * (1.0 + abs(best_obj)):
                    best_t, best_obj = t, obj
            if best_t == 0.0:
                raise ConvergenceError(
                    "feature-sign search found no descent direction",
                    best=a.copy(),
                )

            a[idx] = old + best_t * delta
            tiny = np.abs(a[idx]) < _EFFECTIVE_ZERO
            a[idx[tiny]] = 0.0
            theta[idx] = np.sign(a[idx]).astype(np.int8)
            active = [int(i) for i in idx if a[i] != 0.0]
            if not active:
                break

            idx = np.array(active)
            resid = 2.0 * (gram[np.ix_(idx, idx)] @ a[idx] - corr[idx])
            resid += lam * theta[idx]
            if np.max(np.abs(resid)) <= tol:
                break
            # ties and zero-descent directions: the crossing candidates come
            # first in ts, so stalls deactivate rather than oscillate
            if best_obj >= prev_obj - 1e-15 * (1.0 + abs(prev_obj)):
                stalls += 1
                if stalls >= 3:
                    raise ConvergenceError(
                        "feature-sign search stalled on a degenerate subproblem",
                        best=a.copy(),
                    )
            else:
                stalls = 0
            prev_obj = best_obj


def feature_sign_search(x, dictionary, lam, tol=1e-6, max_steps=1000):
    """Solve min_a ||x - D a||^2 + lam ||a||_1 for one descriptor.

    The returned code satisfies the KKT conditions at tolerance ``tol``:
    |2 d_j'(Da - x) + lam sign(a_j)| <= tol on the support and
    |2 d_j'(Da - x)| <= lam + tol off it.
    """
    x = np.asarray(x, dtype=np.float64)
    atoms = dictionary.atoms
    if x.ndim != 1 or x.shape[0] != atoms.shape[0]:
        raise ValidationError(
            f"descriptor has dimension {x.shape}, dictionary expects {atoms.shape[0]}"
        )
    if not np.all(np.isfinite(x)):
        raise ValidationError("descriptor contains non-finite values")
    if not lam > 0.0:
        raise ValidationError("sparsity penalty must be positive")
    gram = atoms.T @ atoms
    corr = atoms.T @ x
    coef = _feature_sign(gram, corr, lam, tol, max_steps)
    return SparseCode(coefficients=coef, lam=lam)


def encode_batch(descriptors, dictionary, lam, tol=1e-6, max_steps=1000):
    """Sparse-code every descriptor in a batch over a shared dictionary.

    ``descriptors`` is a DenseDescriptorSet or an (n, d) array of row
    descriptors. Column i of the result is the feature-sign solution for
    descriptor i; all-zero descriptors map to all-zero codes.
    """
    rows = np.asarray(getattr(descriptors, "descriptors", descriptors), dtype=np.float64)
    if rows.ndim != 2:
        raise ValidationError("descriptor batch must be a 2-d array")
    if rows.shape[1] != dictionary.dim:
        raise ValidationError(
            f"descriptor dimension {rows.shape[1]} != dictionary dimension {dictionary.dim}"
        )
    if not lam > 0.0:
        raise ValidationError("sparsity penalty must be positive")
    if not np.all(np.isfinite(rows)):
        raise ValidationError("descriptor batch contains non-finite values")
    atoms = dictionary.atoms
    gram = atoms.T @ atoms
    corrs = atoms.T @ rows.T
    A = np.zeros((dictionary.size, rows.shape[0]))
    for i in range(rows.shape[0]):
        if not rows[i].any():
            continue
        A[:, i] = _feature_sign(gram, corrs[:, i], lam, tol, max_steps)
    return CodeMatrix(A=A, lam=lam)


def _lagrange_dual_solve(X, A, lam0=None, max_iter=500):
    """Maximize the dual of min_D ||X - DA||_F^2 s.t. ||d_i|| <= 1.

    Returns (D, duals) where D = X A' (A A' + diag(duals))^{-1}. All rows
    of A must be nonzero. Dual variables are kept nonnegative by bounds.
    """
    n_atoms = A.shape[0]
    p = X @ A.T
    aat = A @ A.T

    def neg_dual(duals):
        s = aat + np.diag(duals)
        try:
            cho = sla.cho_factor(s, check_finite=False)
            b = sla.cho_solve(cho, p.T, check_finite=False).T
        except np.linalg.LinAlgError:
            b = np.linalg.lstsq(s, p.T, rcond=None)[0].T
        value = float((b * p).sum()) - _NORM_BOUND_SQ * float(duals.sum())
        grad = (b * b).sum(axis=0) - _NORM_BOUND_SQ
        # maximize the dual == minimize its negation
        return -value, -grad

    if lam0 is None:
        scale = float(np.trace(aat)) / max(n_atoms, 1)
        lam0 = np.full(n_atoms, 0.1 * max(scale, 1e-6))
    res = minimize(
        neg_dual,
        lam0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(1e-12, None)] * n_atoms,
        options={"maxiter": max_iter, "ftol": 1e-14, "gtol": 1e-10},
    )
    duals = np.maximum(res.x, 0.0)
    s = aat + np.diag(duals)
    try:
        cho = sla.cho_factor(s, check_finite=False)
        atoms = sla.cho_solve(cho, p.T, check_finite=False).T
    except np.linalg.LinAlgError:
        atoms = np.linalg.lstsq(s, p.T, rcond=None)[0].T
    return atoms, duals


def dict_update_lagrange_dual(X, A, dict_init):
    """One dictionary update: min_D ||X - D A||_F^2 s.t. column norms <= 1.

    Atoms whose code row is identically zero are left at their dict_init
    value (they do not appear in the objective). The returned dictionary
    never has a larger objective than ``dict_init``.
    """
    X = np.asarray(X, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if X.ndim != 2 or A.ndim != 2 or X.shape[1] != A.shape[1]:
        raise ValidationError("X and A must be 2-d with matching column counts")
    if X.shape[1] < 1:
        raise ValidationError("dictionary update needs at least one sample")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(A))):
        raise ValidationError("dictionary update inputs must be finite")
    if dict_init.dim != X.shape[0] or dict_init.size != A.shape[0]:
        raise ValidationError("dict_init shape does not match X and A")
    if not A.any():
        raise DegenerateCodesError(
            "all sparse codes are zero; dictionary left unchanged"
        )

    used = np.nonzero(np.abs(A).sum(axis=1) > 0.0)[0]
    new_atoms = dict_init.atoms.copy()
    solved, _ = _lagrange_dual_solve(X, A[used])
    # finite dual tolerance can overshoot the ball by a hair
    norms = np.linalg.norm(solved, axis=0)
    over = norms > 1.0
    solved[:, over] /= norms[over]
    new_atoms[:, used] = solved

    init_obj = float(np.linalg.norm(X - dict_init.atoms @ A, "fro") ** 2)
    new_obj = float(np.linalg.norm(X - new_atoms @ A, "fro") ** 2)
    if new_obj > init_obj:
        return Dictionary(atoms=dict_init.atoms.copy())
    return Dictionary(atoms=new_atoms)


def coding_objective(X, dictionary, A, lam):
    """Full learning objective ||X - DA||_F^2 + lam * sum |A|."""
    resid = X - dictionary.atoms @ A
    return float((resid * resid).sum() + lam * np.abs(A).sum())


def learn_dictionary(descriptors, n_atoms, lam, schedule=None, seed=0, callback=None):
    """Learn a dictionary by alternating sparse coding and dual updates.

    ``descriptors`` is an (n, d) array of row descriptors (a pool sampled
    from the training images). The pool is capped by seeded subsampling at
    ``schedule.pool_cap``. Initial atoms are unit-normalized descriptors
    drawn without replacement. ``callback``, when given, receives the
    objective value after every alternation.
    """
    schedule = schedule or LearnSchedule()
    pool = np.asarray(getattr(descriptors, "descriptors", descriptors), dtype=np.float64)
    if pool.ndim != 2:
        raise ValidationError("descriptor pool must be a 2-d array")
    if not np.all(np.isfinite(pool)):
        raise ValidationError("descriptor pool contains non-finite values")
    if n_atoms < 1:
        raise ValidationError("dictionary size must be >= 1")
    rng = np.random.default_rng(seed)
    if schedule.pool_cap is not None and pool.shape[0] > schedule.pool_cap:
        keep = rng.choice(pool.shape[0], size=schedule.pool_cap, replace=False)
        pool = pool[np.sort(keep)]
    if pool.shape[0] < n_atoms:
        raise ValidationError(
            f"pool of {pool.shape[0]} descriptors is smaller than dictionary size {n_atoms}"
        )

    X = pool.T
    norms = np.linalg.norm(X, axis=0)
    nonzero = np.nonzero(norms > 0.0)[0]
    if nonzero.size < n_atoms:
        raise ValidationError("not enough nonzero descriptors to seed the dictionary")
    chosen = rng.choice(nonzero, size=n_atoms, replace=False)
    atoms0 = X[:, chosen] / norms[chosen]
    dictionary = Dictionary(atoms=atoms0)

    prev_obj = None
    for _ in range(schedule.max_alternations):
        codes = encode_batch(
            pool, dictionary, lam, tol=schedule.fs_tol, max_steps=schedule.fs_max_steps
        )
        dictionary = dict_update_lagrange_dual(X, codes.A, dictionary)
        obj = coding_objective(X, dictionary, codes.A, lam)
        if callback is not None:
            callback(obj)
        if prev_obj is not None and abs(prev_obj - obj) < schedule.rel_tol * max(
            prev_obj, 1e-12
        ):
            break
        prev_obj = obj
    return dictionary
