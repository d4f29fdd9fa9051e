"""Dense primal active-set solver for strictly convex QPs.

Problems have the form::

    min 1/2 x'Hx + x'g   s.t.   lb <= A x <= ub

Equalities are rows with ``lb == ub``. Bounds at or beyond ``INF`` (1e19)
are treated as absent. Equality rows are eliminated up front (they may be
rank deficient as long as they are consistent); the remaining two-sided
inequalities are handled by a primal active-set iteration started from a
feasible point found with an elastic phase-1 problem.
"""

import math
from dataclasses import dataclass, field

import numpy as np

INF = 1e19

SOLVED = "solved"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.g = np.atleast_1d(np.asarray(self.g, dtype=float))
        m = len(self.g)
        if self.A is None:
            self.A = np.zeros((0, m))
            self.lb = np.zeros(0)
            self.ub = np.zeros(0)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, m)
        c = self.A.shape[0]
        self.lb = np.full(c, -INF) if self.lb is None else np.atleast_1d(np.asarray(self.lb, dtype=float))
        self.ub = np.full(c, INF) if self.ub is None else np.atleast_1d(np.asarray(self.ub, dtype=float))
        if self.H.shape != (m, m):
            raise ValueError(f"H has shape {self.H.shape}, expected {(m, m)}")
        if self.lb.shape != (c,) or self.ub.shape != (c,):
            raise ValueError("bounds must have one entry per constraint row")
        if not (np.all(np.isfinite(self.H)) and np.all(np.isfinite(self.g)) and np.all(np.isfinite(self.A))):
            raise ValueError("H, g and A must be finite")
        if np.abs(self.H - self.H.T).max(initial=0.0) > 1e-9 * (1.0 + np.abs(self.H).max(initial=0.0)):
            raise ValueError("H must be symmetric")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)) or np.any(self.lb > self.ub):
            raise ValueError("need lb <= ub elementwise")

    @property
    def n_vars(self):
        return len(self.g)

    @property
    def n_rows(self):
        return self.A.shape[0]

    def objective(self, x):
        return 0.5 * x @ self.H @ x + self.g @ x


@dataclass
class KktReport:
    stationarity: float
    primal: float
    complementarity: float

    def worst(self):
        return max(self.stationarity, self.primal, self.complementarity)


@dataclass
class QpSolution:
    x: np.ndarray
    duals: np.ndarray
    status: str
    iterations: int
    kkt: KktReport
    objective: float
    active_set: list = field(default_factory=list)
    certificate: tuple = ()
    regularization: float = 0.0

    @property
    def solved(self):
        return self.status == SOLVED


def _finite_bounds(lb, ub):
    lo = np.where(lb <= -INF, -np.inf, lb)
    hi = np.where(ub >= INF, np.inf, ub)
    return lo, hi


def check_kkt(problem, x, duals, regularization=0.0):
    """KKT residuals of a candidate primal/dual pair.

    Sign convention: ``H x + g = A' duals``; a positive dual marks an active
    lower bound, a negative one an active upper bound.
    """
    x = np.asarray(x, dtype=float)
    duals = np.asarray(duals, dtype=float)
    if x.shape != (problem.n_vars,) or duals.shape != (problem.n_rows,):
        raise ValueError("candidate dimensions do not match the problem")
    H = problem.H + regularization * np.eye(problem.n_vars)
    stat = np.abs(H @ x + problem.g - problem.A.T @ duals).max(initial=0.0)
    lo, hi = _finite_bounds(problem.lb, problem.ub)
    Ax = problem.A @ x
    with np.errstate(invalid="ignore"):
        viol = np.maximum(np.maximum(lo - Ax, Ax - hi), 0.0)
        primal = float(np.nan_to_num(viol, nan=0.0).max(initial=0.0))
        gap = np.where(duals > 0.0, Ax - lo, np.where(duals < 0.0, hi - Ax, 0.0))
        comp = np.abs(duals) * np.abs(gap)
    comp = np.where(duals == 0.0, 0.0, comp)
    return KktReport(float(stat), primal, float(np.nan_to_num(comp, nan=np.inf).max(initial=0.0)))


class ActiveSetSolver:
    """Primal active-set QP solver.

    One instance keeps its settings and an optional ``trace`` callback,
    called as ``trace(iteration, x, objective, working_rows)`` after every
    phase-2 iteration. Instances are cheap; use one per thread.
    """

    def __init__(self, max_iter=None, feas_tol=1e-9, trace=None):
        self.max_iter = max_iter
        self.feas_tol = feas_tol
        self.trace = trace

    # -- public ----------------------------------------------------------
    def solve(self, problem, x0=None, active_set=None):
        m, c = problem.n_vars, problem.n_rows
        max_iter = self.max_iter or 10 * (m + c)
        H, reg = self._regularized(problem.H)
        lo, hi = _finite_bounds(problem.lb, problem.ub)
        rows = np.arange(c)
        free = np.isinf(lo) & np.isinf(hi)
        eq = (lo == hi) & ~free
        ineq = ~eq & ~free
        eq_rows, in_rows = rows[eq], rows[ineq]

        # equality elimination: x = xp + Z y
        AE, bE = problem.A[eq_rows], lo[eq_rows]
        if len(eq_rows):
            U, sig, Vt = np.linalg.svd(AE, full_matrices=True)
            r = int(np.sum(sig > 1e-10 * max(1.0, sig[0])))
            xp = Vt[:r].T @ ((U[:, :r].T @ bE) / sig[:r])
            if np.abs(AE @ xp - bE).max() > self.feas_tol * (1.0 + np.abs(bE).max()):
                return self._failure(problem, xp, INFEASIBLE, 0, reg, tuple(int(i) for i in eq_rows))
            Z = Vt[r:].T
        else:
            xp = np.zeros(m)
            Z = np.eye(m)
        k = Z.shape[1]
        Hr = Z.T @ H @ Z
        gr = Z.T @ (H @ xp + problem.g)

        C = problem.A[in_rows] @ Z
        off = problem.A[in_rows] @ xp
        clo, chi = lo[in_rows] - off, hi[in_rows] - off
        norms = np.linalg.norm(C, axis=1) if k else np.zeros(len(in_rows))
        keep = norms > 1e-12
        for i in np.flatnonzero(~keep):
            if clo[i] > self.feas_tol or chi[i] < -self.feas_tol:
                return self._failure(problem, xp, INFEASIBLE, 0, reg, (int(in_rows[i]),))
        in_rows, C, clo, chi, norms = in_rows[keep], C[keep], clo[keep], chi[keep], norms[keep]
        C = C / norms[:, None]
        clo, chi = clo / norms, chi / norms
        tol = self.feas_tol

        def objective(y):
            return 0.5 * y @ Hr @ y + gr @ y

        iterations = 0
        y = None
        W = []
        if k == 0:
            y = np.zeros(0)
        else:
            if x0 is not None:
                y0 = Z.T @ (np.asarray(x0, dtype=float) - xp)
                if self._feasible(C, clo, chi, y0, tol):
                    y = y0
                    W = self._warm_working_set(C, clo, chi, y0, in_rows, active_set or [])
            if y is None:
                y_unc = np.linalg.solve(Hr, -gr)
                if self._feasible(C, clo, chi, y_unc, tol):
                    y = y_unc
                else:
                    y, W1, it1, ok = self._phase_one(C, clo, chi, y_unc, max_iter)
                    iterations += it1
                    if not ok:
                        cert = tuple(sorted({int(in_rows[r]) for r, _ in W1}))
                        return self._failure(problem, xp + Z @ y, INFEASIBLE, iterations, reg, cert)
            status = SOLVED
            y, W, it2, done = self._iterate(Hr, gr, C, clo, chi, y, W, max_iter, objective, Z, xp)
            iterations += it2
            if not done:
                status = MAX_ITERATIONS
            x = xp + Z @ y
            return self._finish(problem, H, x, eq_rows, in_rows, W, status, iterations, reg)
        x = xp + Z @ y
        return self._finish(problem, H, x, eq_rows, in_rows, [], SOLVED, iterations, reg)

    # -- internals -------------------------------------------------------
    @staticmethod
    def _regularized(H):
        H = 0.5 * (H + H.T)
        try:
            np.linalg.cholesky(H)
            return H, 0.0
        except np.linalg.LinAlgError:
            pass
        m = H.shape[0]
        eps = 1e-9 * max(np.trace(H), 1e-12) / m
        for _ in range(12):
            try:
                np.linalg.cholesky(H + eps * np.eye(m))
                return H + eps * np.eye(m), eps
            except np.linalg.LinAlgError:
                eps *= 10.0
        raise ValueError("Hessian cannot be regularized to positive definite")

    @staticmethod
    def _feasible(C, clo, chi, y, tol):
        if len(C) == 0:
            return True
        Cy = C @ y
        return bool(np.all(Cy >= clo - tol) and np.all(Cy <= chi + tol))

    @staticmethod
    def _warm_working_set(C, clo, chi, y, in_rows, active_set):
        lookup = {int(r): i for i, r in enumerate(in_rows)}
        W = []
        Cy = C @ y
        for row, side in active_set:
            i = lookup.get(int(row))
            if i is None:
                continue
            bound = clo[i] if side < 0 else chi[i]
            if not math.isfinite(bound) or abs(Cy[i] - bound) > 1e-9:
                continue
            cand = C[[j for j, _ in W] + [i]]
            if np.linalg.matrix_rank(cand, tol=1e-10) == len(cand):
                W.append((i, side))
        return W

    def _phase_one(self, C, clo, chi, y_hat, max_iter):
        """Find a feasible point with an elastic slack ``t``.

        Minimizes ``t + eps/2 (|y - y_hat|^2 + t^2)`` subject to every row
        relaxed by ``t``; with a small ``eps`` the optimum has ``t = 0``
        whenever the constraints are consistent.
        """
        k = C.shape[1]
        rows, lo1, hi1 = [], [], []
        for i in range(len(C)):
            if math.isfinite(clo[i]):
                rows.append(np.append(C[i], 1.0))
                lo1.append(clo[i])
                hi1.append(np.inf)
            if math.isfinite(chi[i]):
                rows.append(np.append(C[i], -1.0))
                lo1.append(-np.inf)
                hi1.append(chi[i])
        origin = []
        for i in range(len(C)):
            if math.isfinite(clo[i]):
                origin.append((i, -1))
            if math.isfinite(chi[i]):
                origin.append((i, 1))
        tz = np.zeros(k + 1)
        tz[-1] = 1.0
        rows.append(tz)
        lo1.append(0.0)
        hi1.append(np.inf)
        C1 = np.array(rows)
        lo1, hi1 = np.array(lo1), np.array(hi1)
        Cy = C @ y_hat
        t0 = max(0.0, float(np.max(np.maximum(clo - Cy, Cy - chi))))
        total = 0
        for eps in (1e-4, 1e-8):
            H1 = eps * np.eye(k + 1)
            g1 = np.zeros(k + 1)
            g1[:k] = -eps * y_hat
            g1[-1] = 1.0
            z = np.append(y_hat, t0)

            def obj(v, H1=H1, g1=g1):
                return 0.5 * v @ H1 @ v + g1 @ v

            z, W, it, _ = self._iterate(H1, g1, C1, lo1, hi1, z, [], max_iter, obj, None, None, trace=False)
            total += it
            if z[-1] <= self.feas_tol:
                return z[:k], [], total, True
        W_orig = [origin[r] for r, _ in W if r < len(origin)]
        return z[:k], W_orig, total, False

    def _iterate(self, Hm, gv, C, lo, hi, z, W, max_iter, objective, Z, xp, trace=True):
        """Primal active-set loop from a feasible ``z``; returns (z, W, iterations, converged)."""
        k = len(z)
        W = list(W)
        for it in range(1, max_iter + 1):
            grad = Hm @ z + gv
            nw = len(W)
            if nw:
                Cw = C[[r for r, _ in W]]
                K = np.zeros((k + nw, k + nw))
                K[:k, :k] = Hm
                K[:k, k:] = -Cw.T
                K[k:, :k] = Cw
                rhs = np.concatenate([-grad, np.zeros(nw)])
                sol = np.linalg.solve(K, rhs)
                p, mu = sol[:k], sol[k:]
            else:
                p = np.linalg.solve(Hm, -grad)
                mu = np.zeros(0)
            if np.abs(p).max(initial=0.0) <= 1e-12 * (1.0 + np.abs(z).max(initial=0.0)):
                signed = np.array([mu[i] if side < 0 else -mu[i] for i, (_, side) in enumerate(W)])
                dual_tol = 1e-11 * (1.0 + np.abs(grad).max(initial=0.0))
                if nw == 0 or signed.min() >= -dual_tol:
                    self._emit(trace, it, z, objective, W, Z, xp)
                    return z, W, it, True
                W.pop(int(np.argmin(signed)))
                self._emit(trace, it, z, objective, W, Z, xp)
                continue
            alpha, block = 1.0, None
            if len(C):
                in_w = np.zeros(len(C), dtype=bool)
                in_w[[r for r, _ in W]] = True
                Cp = C @ p
                Cz = C @ z
                thresh = 1e-12 * np.abs(p).max()
                with np.errstate(divide="ignore", invalid="ignore"):
                    up = np.where(~in_w & (Cp > thresh), (hi - Cz) / Cp, np.inf)
                    dn = np.where(~in_w & (Cp < -thresh), (lo - Cz) / Cp, np.inf)
                up = np.maximum(np.nan_to_num(up, nan=np.inf), 0.0)
                dn = np.maximum(np.nan_to_num(dn, nan=np.inf), 0.0)
                steps = np.minimum(up, dn)
                j = int(np.argmin(steps))  # first index wins ties
                if steps[j] < 1.0:
                    alpha = float(steps[j])
                    block = (j, 1 if up[j] <= dn[j] else -1)
            z = z + alpha * p
            if block is not None:
                W.append(block)
            self._emit(trace, it, z, objective, W, Z, xp)
        return z, W, max_iter, False

    def _emit(self, enabled, it, z, objective, W, Z, xp):
        if enabled and self.trace is not None:
            x = xp + Z @ z if Z is not None else z
            self.trace(it, x, float(objective(z)), [r for r, _ in W])

    def _finish(self, problem, H, x, eq_rows, in_rows, W, status, iterations, reg):
        active = list(eq_rows) + [int(in_rows[r]) for r, _ in W]
        duals = np.zeros(problem.n_rows)
        if active:
            lam, *_ = np.linalg.lstsq(problem.A[active].T, H @ x + problem.g, rcond=None)
            duals[active] = lam
        kkt = check_kkt(problem, x, duals, reg)
        return QpSolution(
            x=x, duals=duals, status=status, iterations=iterations, kkt=kkt,
            objective=float(problem.objective(x)),
            active_set=[(int(in_rows[r]), side) for r, side in W], regularization=reg,
        )

    def _failure(self, problem, x, status, iterations, reg, certificate):
        duals = np.zeros(problem.n_rows)
        return QpSolution(
            x=x, duals=duals, status=status, iterations=iterations,
            kkt=check_kkt(problem, x, duals, reg), objective=float(problem.objective(x)),
            certificate=certificate, regularization=reg,
        )


def solve(problem, x0=None, active_set=None):
    return ActiveSetSolver().solve(problem, x0=x0, active_set=active_set)


# -- text dump ------------------------------------------------------------

def dump_problem(problem, path):
    """Write a problem as text: a ``qp <m> <c>`` header then H, g, A, lb, ub rows."""
    m, c = problem.n_vars, problem.n_rows
    lines = [f"qp {m} {c}", "# H"]
    lines += [" ".join(repr(float(v)) for v in row) for row in problem.H]
    lines += ["# g", " ".join(repr(float(v)) for v in problem.g), "# A"]
    lines += [" ".join(repr(float(v)) for v in row) for row in problem.A]
    lines += ["# lb", " ".join(repr(float(v)) for v in problem.lb)]
    lines += ["# ub", " ".join(repr(float(v)) for v in problem.ub)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_problem(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    head = lines[0].split()
    if head[0] != "qp":
        raise ValueError("not a QP dump")
    m, c = int(head[1]), int(head[2])
    vals = [np.array(ln.split(), dtype=float) for ln in lines[1:]]
    H = np.array(vals[:m]).reshape(m, m)
    g = vals[m]
    A = np.array(vals[m + 1:m + 1 + c]).reshape(c, m)
    lb = vals[m + 1 + c] if c else np.zeros(0)
    ub = vals[m + 2 + c] if c else np.zeros(0)
    return QpProblem(H, g, A, lb, ub)
