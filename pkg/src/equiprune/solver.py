"""Self-contained linear and mixed-integer linear programming.

LPs are solved by a bounded-variable primal simplex on the full
tableau: two phases, an artificial-variable identity start, Dantzig
pricing with a Bland fallback after degenerate stalls, and a
bounded-variable ratio test with bound flips.  The reduced-cost row is
maintained incrementally and recomputed exactly from the original data
at regular intervals and before any claim of optimality; the returned
basic solution is always re-derived with a dense factorization of the
original basis columns and checked for feasibility and optimality
independently of the (possibly drifted) tableau.

Integer restrictions are handled by best-bound branch and bound on the
LP relaxation with most-fractional branching.  No external solver is
involved; numpy supplies the linear algebra.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import SolverFailureError


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


_SENSE_CODE = {"<=": -1, "==": 0, ">=": 1}
_SENSE_TEXT = {-1: "<=", 0: "=", 1: ">="}


@dataclass
class SolverOptions:
    """Tolerances and limits for the LP and MILP solvers."""

    tol_feas: float = 1e-7       # bound/row feasibility
    tol_int: float = 1e-6        # integrality of relaxation values
    tol_gap: float = 1e-9        # absolute incumbent/bound gap
    tol_cost: float = 1e-9       # reduced-cost threshold for pricing
    tol_pivot: float = 1e-9      # minimum pivot magnitude
    max_iterations: int = 50_000  # simplex pivots per LP solve
    max_nodes: int = 100_000     # branch-and-bound nodes
    refactor_every: int = 60     # exact recompute interval (pivots)
    bland_after: int = 80        # degenerate steps before Bland's rule


@dataclass
class MilpProblem:
    """min (or max) c'x  s.t.  A x {<=,==,>=} b,  lower <= x <= upper,
    x_j integral where ``integer[j]``."""

    c: np.ndarray
    A: np.ndarray
    senses: np.ndarray          # int8 per row: -1 '<=', 0 '==', +1 '>='
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray         # bool per variable
    maximize: bool = False
    var_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.b.shape[0]


@dataclass
class LpSolution:
    status: SolveStatus
    x: np.ndarray | None
    objective: float | None
    iterations: int


@dataclass
class MilpSolution:
    status: SolveStatus
    x: np.ndarray | None
    objective: float | None
    best_bound: float | None
    nodes: int
    iterations: int


class ProblemBuilder:
    """Incremental construction of a MilpProblem."""

    def __init__(self, maximize: bool = False):
        self.maximize = maximize
        self._obj: list[float] = []
        self._lo: list[float] = []
        self._up: list[float] = []
        self._int: list[bool] = []
        self._var_names: list[str] = []
        self._rows: list[tuple[dict[int, float], int, float]] = []
        self._row_names: list[str] = []

    @property
    def num_vars(self) -> int:
        return len(self._obj)

    def add_var(self, name: str | None = None, lo: float = 0.0,
                up: float = np.inf, obj: float = 0.0,
                integer: bool = False) -> int:
        if lo > up:
            raise ValueError(f"variable {name or len(self._obj)}: lo > up")
        j = len(self._obj)
        self._obj.append(float(obj))
        self._lo.append(float(lo))
        self._up.append(float(up))
        self._int.append(bool(integer))
        self._var_names.append(name if name is not None else f"x{j}")
        return j

    def add_row(self, terms: Iterable[tuple[int, float]], sense: str,
                rhs: float, name: str | None = None) -> int:
        if sense not in _SENSE_CODE:
            raise ValueError(f"unknown sense {sense!r}")
        coeffs: dict[int, float] = {}
        for j, a in terms:
            if not 0 <= j < len(self._obj):
                raise ValueError(f"row references unknown variable {j}")
            coeffs[j] = coeffs.get(j, 0.0) + float(a)
        i = len(self._rows)
        self._rows.append((coeffs, _SENSE_CODE[sense], float(rhs)))
        self._row_names.append(name if name is not None else f"c{i}")
        return i

    def build(self) -> MilpProblem:
        n = len(self._obj)
        m = len(self._rows)
        A = np.zeros((m, n))
        b = np.empty(m)
        senses = np.empty(m, dtype=np.int8)
        for i, (coeffs, sense, rhs) in enumerate(self._rows):
            for j, a in coeffs.items():
                A[i, j] = a
            senses[i] = sense
            b[i] = rhs
        return MilpProblem(c=np.array(self._obj), A=A, senses=senses, b=b,
                           lower=np.array(self._lo), upper=np.array(self._up),
                           integer=np.array(self._int, dtype=bool),
                           maximize=self.maximize,
                           var_names=list(self._var_names),
                           row_names=list(self._row_names))


# ---------------------------------------------------------------------------
# Bounded-variable primal simplex (full tableau, two phases)

_AT_LOWER, _AT_UPPER, _BASIC, _FREE = 0, 1, 2, 3


class _Simplex:
    """One LP solve.  Works on min c'x with the problem's rows turned
    into equalities via one slack per row ('<=' slack in [0, inf),
    '>=' slack in (-inf, 0], '==' slack fixed at 0) and one artificial
    per row for the phase-1 start."""

    def __init__(self, c: np.ndarray, A: np.ndarray, b: np.ndarray,
                 senses: np.ndarray, lo: np.ndarray, up: np.ndarray,
                 opts: SolverOptions):
        m, n = A.shape
        self.m, self.n = m, n
        self.opts = opts
        slack_lo = np.where(senses == 1, -np.inf, 0.0)
        slack_up = np.where(senses == -1, np.inf, 0.0)
        lo_ext = np.concatenate([lo, slack_lo])
        up_ext = np.concatenate([up, slack_up])
        # start every non-artificial variable at a finite bound
        val = np.where(np.isfinite(lo_ext), lo_ext,
                       np.where(np.isfinite(up_ext), up_ext, 0.0))
        stat = np.where(np.isfinite(lo_ext), _AT_LOWER,
                        np.where(np.isfinite(up_ext), _AT_UPPER, _FREE))
        residual = b - np.hstack([A, np.eye(m)]) @ val
        sigma = np.where(residual >= 0, 1.0, -1.0)
        self.A_all = np.hstack([A, np.eye(m), np.diag(sigma)])
        self.N = n + 2 * m
        self.lo = np.concatenate([lo_ext, np.zeros(m)])
        self.up = np.concatenate([up_ext, np.full(m, np.inf)])
        self.b = b
        self.basis = np.arange(n + m, n + 2 * m)
        self.stat = np.concatenate([stat, np.full(m, _AT_LOWER)])
        self.stat[self.basis] = _BASIC
        self.val = np.concatenate([val, np.zeros(m)])
        self.T = sigma[:, None] * self.A_all  # B^{-1} A with B = diag(sigma)
        self.xB = sigma * residual
        self.cc = np.zeros(self.N)           # current phase objective
        self.d = np.zeros(self.N)
        self.iterations = 0

    # -- exact recomputation from original data ---------------------------

    def _basis_matrix(self) -> np.ndarray:
        return self.A_all[:, self.basis]

    def _refactor(self, full_tableau: bool = False) -> None:
        B = self._basis_matrix()
        try:
            if full_tableau:
                self.T = np.linalg.solve(B, self.A_all)
            x_nb = self.val.copy()
            x_nb[self.basis] = 0.0
            self.xB = np.linalg.solve(B, self.b - self.A_all @ x_nb)
            y = np.linalg.solve(B.T, self.cc[self.basis])
        except np.linalg.LinAlgError as exc:
            raise SolverFailureError(f"singular simplex basis: {exc}") from exc
        self.d = self.cc - y @ self.A_all

    def assemble(self) -> np.ndarray:
        x = self.val.copy()
        x[self.basis] = self.xB
        return x

    def objective(self) -> float:
        return float(self.cc @ self.assemble())

    # -- pivoting loop -----------------------------------------------------

    def _candidates(self, tol: float) -> np.ndarray:
        movable = (self.up - self.lo) > 0
        d, stat = self.d, self.stat
        return movable & (((stat == _AT_LOWER) & (d < -tol))
                          | ((stat == _AT_UPPER) & (d > tol))
                          | ((stat == _FREE) & (np.abs(d) > tol)))

    def iterate(self, budget: int) -> SolveStatus:
        """Pivot until optimal/unbounded or the budget runs out."""
        opts = self.opts
        since_refactor = 0
        stall = 0
        bland = False
        while True:
            if self.iterations >= budget:
                return SolveStatus.ITERATION_LIMIT
            cand = self._candidates(opts.tol_cost)
            if not cand.any():
                if since_refactor == 0:
                    return SolveStatus.OPTIMAL
                self._refactor()        # confirm against original data
                since_refactor = 0
                continue
            idx = np.nonzero(cand)[0]
            j = int(idx[0]) if bland else int(idx[np.argmax(np.abs(self.d[idx]))])
            if self.stat[j] == _AT_UPPER or (self.stat[j] == _FREE
                                             and self.d[j] > 0):
                direction = -1.0
            else:
                direction = 1.0

            col = self.T[:, j].copy()
            delta = direction * col
            lo_B = self.lo[self.basis]
            up_B = self.up[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dec = np.where(delta > opts.tol_pivot,
                                 (self.xB - lo_B) / delta, np.inf)
                t_inc = np.where(delta < -opts.tol_pivot,
                                 (up_B - self.xB) / (-delta), np.inf)
            t_rows = np.maximum(np.minimum(t_dec, t_inc), 0.0)
            t_row = float(t_rows.min()) if self.m else np.inf
            span = self.up[j] - self.lo[j]
            t_flip = float(span) if np.isfinite(span) else np.inf

            if min(t_row, t_flip) == np.inf:
                if since_refactor == 0:
                    return SolveStatus.UNBOUNDED
                self._refactor()        # rule out drift before giving up
                since_refactor = 0
                continue

            self.iterations += 1
            since_refactor += 1
            if t_flip <= t_row:
                # bound flip: no basis change
                self.xB -= direction * t_flip * col
                self.stat[j] = _AT_UPPER if direction > 0 else _AT_LOWER
                self.val[j] = self.up[j] if direction > 0 else self.lo[j]
                step = t_flip
            else:
                near = t_rows <= t_row + 1e-9
                rows = np.nonzero(near)[0]
                if bland:
                    r = int(rows[np.argmin(self.basis[rows])])
                else:
                    r = int(rows[np.argmax(np.abs(delta[rows]))])
                leaving = int(self.basis[r])
                enter_value = self.val[j] + direction * t_row
                self.xB -= direction * t_row * col
                if delta[r] > 0:
                    self.stat[leaving] = _AT_LOWER
                    self.val[leaving] = self.lo[leaving]
                else:
                    self.stat[leaving] = _AT_UPPER
                    self.val[leaving] = self.up[leaving]
                self.basis[r] = j
                self.stat[j] = _BASIC
                self.xB[r] = enter_value
                piv = col[r]
                self.T[r] /= piv
                colc = col.copy()
                colc[r] = 0.0
                self.T -= colc[:, None] * self.T[r]
                self.d -= self.d[j] * self.T[r]
                step = t_row

            if step <= 1e-12:
                stall += 1
                if stall > opts.bland_after:
                    bland = True
            else:
                stall = 0
                bland = False
            if since_refactor >= opts.refactor_every:
                self._refactor()
                since_refactor = 0


def _simplex_solve(c: np.ndarray, A: np.ndarray, b: np.ndarray,
                   senses: np.ndarray, lo: np.ndarray, up: np.ndarray,
                   opts: SolverOptions) -> LpSolution:
    if np.any(lo > up):
        return LpSolution(SolveStatus.INFEASIBLE, None, None, 0)
    sx = _Simplex(c, A, b, senses, lo, up, opts)
    n, m = sx.n, sx.m

    # phase 1: minimize the artificial sum
    sx.cc = np.zeros(sx.N)
    sx.cc[n + m:] = 1.0
    sx.d = sx.cc - sx.cc[sx.basis] @ sx.T
    status = sx.iterate(opts.max_iterations)
    if status == SolveStatus.ITERATION_LIMIT:
        return LpSolution(status, None, None, sx.iterations)
    if status == SolveStatus.UNBOUNDED:
        raise SolverFailureError("phase-1 objective cannot be unbounded")
    # A feasible problem drives the artificial sum to roundoff level
    # (~1e-13 at these scales); a leftover orders of magnitude above
    # that is a genuinely empty feasible region, even when it would
    # pass the looser per-row tolerance applied to returned solutions.
    if sx.objective() > 1e-2 * opts.tol_feas * (1.0 + np.abs(b).max(initial=0.0)):
        return LpSolution(SolveStatus.INFEASIBLE, None, None, sx.iterations)

    # phase 2: clamp artificials to zero and minimize the real objective
    sx.lo[n + m:] = 0.0
    sx.up[n + m:] = 0.0
    sx.val[n + m:] = 0.0
    sx.cc = np.concatenate([c, np.zeros(2 * m)])
    sx._refactor()
    for _attempt in range(3):
        status = sx.iterate(opts.max_iterations)
        if status != SolveStatus.OPTIMAL:
            x = sx.assemble()[:n] if status == SolveStatus.ITERATION_LIMIT else None
            obj = float(c @ x) if x is not None else None
            return LpSolution(status, x, obj, sx.iterations)
        # independent check of the claimed optimum from original data
        sx._refactor()
        lo_B = sx.lo[sx.basis]
        up_B = sx.up[sx.basis]
        scale = 1.0 + np.abs(sx.b).max(initial=0.0)
        feas = (np.all(sx.xB >= lo_B - opts.tol_feas * scale)
                and np.all(sx.xB <= up_B + opts.tol_feas * scale))
        opt = not _verified_candidates(sx, opts).any()
        if feas and opt:
            x = sx.assemble()[:n]
            return LpSolution(SolveStatus.OPTIMAL, x, float(c @ x),
                              sx.iterations)
        sx._refactor(full_tableau=True)
    raise SolverFailureError("simplex solution failed numerical verification")


def _verified_candidates(sx: _Simplex, opts: SolverOptions) -> np.ndarray:
    tol = 10 * opts.tol_cost * (1.0 + np.abs(sx.cc).max(initial=0.0))
    return sx._candidates(tol)


def _prepare(problem: MilpProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray,
                                            np.ndarray]:
    c = -problem.c if problem.maximize else problem.c
    return (np.asarray(c, dtype=float), np.asarray(problem.A, dtype=float),
            np.asarray(problem.b, dtype=float),
            np.asarray(problem.senses, dtype=np.int8))


def solve_lp(problem: MilpProblem,
             options: SolverOptions | None = None) -> LpSolution:
    """Solve the LP relaxation (integrality flags are ignored)."""
    opts = options or SolverOptions()
    c, A, b, senses = _prepare(problem)
    sol = _simplex_solve(c, A, b, senses,
                         np.asarray(problem.lower, dtype=float),
                         np.asarray(problem.upper, dtype=float), opts)
    if problem.maximize and sol.objective is not None:
        sol.objective = -sol.objective
    return sol


# ---------------------------------------------------------------------------
# Branch and bound


def solve_milp(problem: MilpProblem,
               options: SolverOptions | None = None) -> MilpSolution:
    """Best-bound branch and bound with most-fractional branching.

    Node key is (bound, -depth, sequence): ties on the bound are broken
    by diving deeper first.  Children are solved eagerly so every heap
    entry carries a true LP bound.  A relaxation point that is integral
    within tolerance becomes an incumbent only after re-solving with the
    integer block fixed to its rounding; if that rounding is infeasible
    (possible when a big constant multiplies a near-zero integer
    variable) the point is not trusted and the node is branched instead.
    """
    opts = options or SolverOptions()
    c, A, b, senses = _prepare(problem)
    int_idx = np.nonzero(problem.integer)[0]
    sign = -1.0 if problem.maximize else 1.0

    def lp(lo: np.ndarray, up: np.ndarray) -> LpSolution:
        return _simplex_solve(c, A, b, senses, lo, up, opts)

    def fractionality(x: np.ndarray) -> np.ndarray:
        v = x[int_idx]
        return np.abs(v - np.round(v))

    iterations = 0
    nodes = 0
    incumbent: np.ndarray | None = None
    inc_obj = np.inf
    heap: list[tuple[float, int, int, np.ndarray, np.ndarray, np.ndarray]] = []
    seq = itertools.count()

    def polish(x: np.ndarray) -> tuple[np.ndarray | None, float]:
        """Exact solution at the rounded integer assignment, or None
        when that assignment is infeasible."""
        nonlocal iterations
        lo_f = np.asarray(problem.lower, dtype=float).copy()
        up_f = np.asarray(problem.upper, dtype=float).copy()
        fixed = np.round(x[int_idx])
        lo_f[int_idx] = fixed
        up_f[int_idx] = fixed
        sol = lp(lo_f, up_f)
        iterations += sol.iterations
        if sol.status == SolveStatus.OPTIMAL:
            return sol.x, sol.objective
        return None, np.inf

    def offer(sol: LpSolution, lo: np.ndarray, up: np.ndarray,
              negdepth: int) -> None:
        """Turn a solved relaxation into an incumbent or a heap node."""
        nonlocal incumbent, inc_obj
        if sol.objective >= inc_obj - opts.tol_gap:
            return
        if int_idx.size and fractionality(sol.x).max(initial=0.0) > opts.tol_int:
            heapq.heappush(heap, (sol.objective, negdepth, next(seq),
                                  lo, up, sol.x))
            return
        px, pobj = polish(sol.x)
        if px is not None:
            if pobj < inc_obj:
                incumbent, inc_obj = px, pobj
        else:
            # rounding-infeasible: keep searching below this node
            heapq.heappush(heap, (sol.objective, negdepth, next(seq),
                                  lo, up, sol.x))

    lo0 = np.asarray(problem.lower, dtype=float)
    up0 = np.asarray(problem.upper, dtype=float)
    root = lp(lo0, up0)
    iterations += root.iterations
    if root.status != SolveStatus.OPTIMAL:
        return MilpSolution(root.status, None, None, None, 0, iterations)

    status = SolveStatus.OPTIMAL
    best_bound = root.objective
    offer(root, lo0, up0, 0)

    while heap:
        bound, negdepth, _, lo, up, x = heapq.heappop(heap)
        best_bound = bound
        if bound >= inc_obj - opts.tol_gap:
            best_bound = inc_obj  # everything left is dominated
            break
        if nodes >= opts.max_nodes:
            status = SolveStatus.ITERATION_LIMIT
            break
        nodes += 1
        frac = fractionality(x)
        frac[lo[int_idx] >= up[int_idx]] = -1.0  # never branch on fixed vars
        v = int(int_idx[np.argmax(frac)])
        if lo[v] >= up[v]:
            raise SolverFailureError("no free integer variable to branch on")
        floor_v = np.floor(x[v])
        if floor_v >= up[v]:  # x_v at its (integral) upper bound
            floor_v = up[v] - 1.0
        for child_lo, child_up in (
                (lo, _with(up, v, floor_v)),
                (_with(lo, v, floor_v + 1.0), up)):
            if child_lo[v] > child_up[v]:
                continue
            sol = lp(child_lo, child_up)
            iterations += sol.iterations
            if sol.status == SolveStatus.INFEASIBLE:
                continue
            if sol.status == SolveStatus.ITERATION_LIMIT:
                status = SolveStatus.ITERATION_LIMIT
                heap.clear()
                break
            if sol.status == SolveStatus.UNBOUNDED:
                raise SolverFailureError(
                    "bounded relaxation turned unbounded in a child node")
            offer(sol, child_lo, child_up, negdepth - 1)
    else:
        if status == SolveStatus.OPTIMAL and incumbent is not None:
            best_bound = inc_obj

    if status == SolveStatus.OPTIMAL:
        if incumbent is None:
            return MilpSolution(SolveStatus.INFEASIBLE, None, None, None,
                                nodes, iterations)
        return MilpSolution(SolveStatus.OPTIMAL, incumbent,
                            sign * inc_obj, sign * best_bound,
                            nodes, iterations)
    obj = sign * inc_obj if incumbent is not None else None
    return MilpSolution(status, incumbent, obj, sign * best_bound,
                        nodes, iterations)


def _with(arr: np.ndarray, i: int, value: float) -> np.ndarray:
    out = arr.copy()
    out[i] = value
    return out


# ---------------------------------------------------------------------------
# LP-format text dump (debugging aid)


def lp_format_text(problem: MilpProblem, name: str = "problem") -> str:
    def var(j: int) -> str:
        return problem.var_names[j] if problem.var_names else f"x{j}"

    def terms(coeffs: Sequence[float], indices: Iterable[int]) -> str:
        parts = []
        for j in indices:
            a = coeffs[j]
            sign = "-" if a < 0 else "+"
            parts.append(f"{sign} {abs(a):.12g} {var(j)}")
        return " ".join(parts) if parts else "0"

    lines = [f"\\ {name}",
             "Maximize" if problem.maximize else "Minimize",
             " obj: " + terms(problem.c, np.nonzero(problem.c)[0]),
             "Subject To"]
    for i in range(problem.num_rows):
        rname = problem.row_names[i] if problem.row_names else f"c{i}"
        row = terms(problem.A[i], np.nonzero(problem.A[i])[0])
        lines.append(f" {rname}: {row} {_SENSE_TEXT[int(problem.senses[i])]} "
                     f"{problem.b[i]:.12g}")
    lines.append("Bounds")
    for j in range(problem.num_vars):
        lo, up = problem.lower[j], problem.upper[j]
        if lo == -np.inf and up == np.inf:
            lines.append(f" {var(j)} free")
        else:
            left = "-infinity" if lo == -np.inf else f"{lo:.12g}"
            right = "+infinity" if up == np.inf else f"{up:.12g}"
            lines.append(f" {left} <= {var(j)} <= {right}")
    if problem.integer.any():
        lines.append("Generals")
        lines.append(" " + " ".join(var(j) for j in np.nonzero(problem.integer)[0]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def dump_lp(problem: MilpProblem, path: Union[str, Path],
            name: str = "problem") -> None:
    Path(path).write_text(lp_format_text(problem, name=name))
