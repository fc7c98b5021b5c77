"""Dense two-phase primal simplex for equality and >= constrained LPs.

Every variable is nonnegative, and any set of columns can be fixed to zero
with :meth:`LpModel.set_fixed`.  The model remembers its basis, so re-solving
after :meth:`LpModel.add_column` or after changing the fixed set continues
from the previous vertex.  Phase 1 minimizes the total value of artificials
and fixed columns; when that is positive at optimum the model is infeasible.
Adding a row discards the basis.

On infeasibility the phase-1 duals are returned as a Farkas ray ``y`` with
``y @ b > 0`` and ``y @ a_j <= 0`` for every free column ``a_j`` (and ``y_i >= 0``
on ``>=`` rows), which is what column generation needs to price in columns
that can restore feasibility.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numba
import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-6
INT_TOL = 1e-6
PIVOT_TOL = 1e-7
DRIVE_OUT_TOL = 1e-5
REFACTOR_EVERY = 100
DEGENERATE_LIMIT = 2000
HARRIS_TOL = 1e-9

_STRUCT, _SURPLUS, _ART = 0, 1, 2


class LpError(RuntimeError):
    """Base class for LP engine failures."""


class LpNumericalError(LpError):
    """The simplex lost accuracy or hit its iteration limit."""


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class Sense(str, enum.Enum):
    EQ = "="
    GE = ">="


@dataclass
class LpResult:
    status: Status
    objective: float
    primal: np.ndarray
    duals: np.ndarray
    farkas_ray: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def _as_pairs(coeffs: Mapping[int, float] | Iterable[tuple[int, float]]) -> list[tuple[int, float]]:
    items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
    return [(int(k), float(v)) for k, v in items]


class LpModel:
    """min c.x  s.t.  rows (= or >=),  x >= 0."""

    def __init__(self) -> None:
        self._rhs: list[float] = []
        self._sense: list[Sense] = []
        # -1 on rows given as "<=" and stored negated as ">="
        self._flip: list[float] = []
        self._obj: list[float] = []
        self._cols: list[list[tuple[int, float]]] = []
        self.col_names: list[str | None] = []
        self._fixed = np.zeros(0, dtype=bool)
        self.row_names: list[str | None] = []
        self._sync_rows = 0
        self._reset_sparse()
        self._reset_basis()

    # -- construction ---------------------------------------------------
    @property
    def num_rows(self) -> int:
        return len(self._rhs)

    @property
    def num_cols(self) -> int:
        return len(self._obj)

    def add_row(self, rhs: float, sense: Sense | str = Sense.EQ,
                coeffs: Mapping[int, float] | Iterable[tuple[int, float]] = (),
                name: str | None = None) -> int:
        """Append a row; ``coeffs`` maps existing column ids to coefficients."""
        pairs = _as_pairs(coeffs)
        if not np.isfinite(rhs):
            raise ValueError("row right-hand side must be finite")
        for j, _ in pairs:
            if not 0 <= j < self.num_cols:
                raise IndexError(f"row references unknown column {j}")
        flip = 1.0
        if sense == "<=":
            rhs, pairs, sense, flip = -rhs, [(j, -v) for j, v in pairs], Sense.GE, -1.0
        else:
            sense = Sense(sense)
        i = self.num_rows
        self._rhs.append(float(rhs))
        self._flip.append(flip)
        self._sense.append(sense)
        self.row_names.append(name)
        for j, v in pairs:
            if v != 0.0:
                self._cols[j].append((i, v))
        self._reset_sparse()
        self._reset_basis()
        return i

    def add_column(self, obj: float,
                   coeffs: Mapping[int, float] | Iterable[tuple[int, float]] = (),
                   name: str | None = None) -> int:
        """Append a column; ``coeffs`` maps existing row ids to coefficients."""
        pairs = _as_pairs(coeffs)
        if not np.isfinite(obj):
            raise ValueError("objective coefficient must be finite")
        for i, _ in pairs:
            if not 0 <= i < self.num_rows:
                raise IndexError(f"column references unknown row {i}")
        self._obj.append(float(obj))
        self._cols.append([(i, self._flip[i] * v) for i, v in pairs if v != 0.0])
        self.col_names.append(name)
        if len(self._fixed) < self.num_cols:
            self._fixed = np.concatenate([self._fixed, np.zeros(max(16, len(self._fixed)), dtype=bool)])
        return self.num_cols - 1

    def column(self, j: int) -> tuple[float, list[tuple[int, float]]]:
        return self._obj[j], [(i, self._flip[i] * v) for i, v in self._cols[j]]

    def rhs(self) -> np.ndarray:
        """Right-hand sides with ``<=`` rows stored as negated ``>=`` rows."""
        return np.array(self._rhs)

    def senses(self) -> list[Sense]:
        return list(self._sense)

    def flips(self) -> np.ndarray:
        """-1 for rows entered as ``<=``, +1 otherwise."""
        return np.array(self._flip)

    def matrix(self) -> np.ndarray:
        """Dense constraint matrix, ``<=`` rows negated to match :meth:`rhs`."""
        A = np.zeros((self.num_rows, self.num_cols))
        for j, col in enumerate(self._cols):
            for i, v in col:
                A[i, j] += v
        return A

    def objective_vector(self) -> np.ndarray:
        return np.array(self._obj)

    def set_fixed(self, fixed: np.ndarray | Iterable[int]) -> None:
        """Fix columns to zero: a boolean mask over columns or a collection of ids.

        Replaces the previous fixed set; the basis is kept.
        """
        mask = np.zeros(len(self._fixed), dtype=bool)
        arr = np.asarray(list(fixed) if not isinstance(fixed, np.ndarray) else fixed)
        if arr.dtype == bool:
            if arr.size != self.num_cols:
                raise ValueError(f"fixed mask has {arr.size} entries for {self.num_cols} columns")
            mask[:self.num_cols] = arr
        elif arr.size:
            if arr.min() < 0 or arr.max() >= self.num_cols:
                raise IndexError("fixed column id out of range")
            mask[arr.astype(np.int64)] = True
        self._fixed = mask

    @property
    def fixed(self) -> np.ndarray:
        return self._fixed[:self.num_cols].copy()

    # -- simplex state ----------------------------------------------------
    def _reset_basis(self) -> None:
        self._basis_kind: np.ndarray | None = None
        self._basis_idx: np.ndarray | None = None
        self._Binv: np.ndarray | None = None
        self._xB: np.ndarray | None = None
        self._since_refactor = 0

    def _reset_sparse(self) -> None:
        # sign-normalized CSC copy of the structural columns, grown on demand
        self._ptr = np.zeros(1, dtype=np.int64)
        self._idx = np.zeros(0, dtype=np.int64)
        self._val = np.zeros(0)
        self._nnz = 0
        self._nsync = 0

    def _sync_sparse(self) -> None:
        if self._sync_rows != self.num_rows:
            self._reset_sparse()
            self._sync_rows = self.num_rows
        N = self.num_cols
        if self._nsync == N:
            return
        sign = self._row_sign()
        new = self._cols[self._nsync:N]
        add = sum(len(c) for c in new)
        if self._nnz + add > self._idx.size:
            cap = max(2 * self._idx.size, self._nnz + add, 64)
            self._idx = np.resize(self._idx, cap)
            self._val = np.resize(self._val, cap)
        ptr = np.empty(len(new), dtype=np.int64)
        k = self._nnz
        for t, col in enumerate(new):
            for i, v in col:
                self._idx[k] = i
                self._val[k] = sign[i] * v
                k += 1
            ptr[t] = k
        self._ptr = np.concatenate([self._ptr, ptr])
        self._nnz = k
        self._nsync = N

    def _row_sign(self) -> np.ndarray:
        return np.where(np.array(self._rhs) < 0, -1.0, 1.0) if self._rhs else np.zeros(0)

    def solve(self) -> LpResult:
        return _Simplex(self).run()

    def dump(self, path: str | Path) -> None:
        """Write the model in CPLEX LP format."""
        Path(path).write_text(to_lp_format(self), encoding="utf-8")


# kernel return codes
_K_OPTIMAL, _K_UNBOUNDED, _K_REFACTOR = 0, 1, 2


@numba.njit(cache=True)
def _pivot_kernel(basis, Binv, xB, alpha, r, q, step, work):
    m = basis.size
    ar = alpha[r]
    for k in range(m):
        work[k] = Binv[r, k] / ar
    for i in range(m):
        a = alpha[i]
        if i != r and a != 0.0:
            for k in range(m):
                Binv[i, k] -= a * work[k]
    for k in range(m):
        Binv[r, k] = work[k]
    for i in range(m):
        xB[i] -= step * alpha[i]
    xB[r] = step
    basis[r] = q


@numba.njit(cache=True)
def _fresh_reduced_costs(ptr, idx, val, cost, basis, Binv, y, d):
    m = basis.size
    for k in range(m):
        y[k] = 0.0
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            for k in range(m):
                y[k] += cb * Binv[i, k]
    for j in range(ptr.size - 1):
        s = cost[j]
        for p in range(ptr[j], ptr[j + 1]):
            s -= y[idx[p]] * val[p]
        d[j] = s


@numba.njit(cache=True)
def _choose_entering(d, is_basic, eligible, weights, bland, opt_tol):
    q = -1
    best = 0.0
    for j in range(d.size):
        if is_basic[j] or not eligible[j] or d[j] >= -opt_tol:
            continue
        if bland:
            return j
        score = d[j] * d[j] / weights[j]
        if score > best:
            best = score
            q = j
    return q


@numba.njit(cache=True)
def _simplex_kernel(ptr, idx, val, cost, eligible, penal, basis, Binv, xB, weights,
                    max_pivots, degenerate, bland_after, block_penalized,
                    opt_tol, piv_tol, harris_tol):
    """Primal simplex pivots with Devex pricing and a Harris ratio test.

    Duals and reduced costs are updated from the pivot row, and the same pass
    over the columns updates the Devex weights and picks the next entering
    column.  Returns ``(code, pivots, degenerate)``; stops after ``max_pivots``
    so the caller can refactorize.
    """
    m = basis.size
    ntot = ptr.size - 1
    is_basic = np.zeros(ntot, dtype=np.bool_)
    for i in range(m):
        is_basic[basis[i]] = True
    y = np.empty(m)
    d = np.empty(ntot)
    alpha = np.empty(m)
    work = np.empty(m)
    _fresh_reduced_costs(ptr, idx, val, cost, basis, Binv, y, d)
    fresh = True
    pivots = 0
    q = _choose_entering(d, is_basic, eligible, weights, degenerate >= bland_after, opt_tol)
    while True:
        if pivots >= max_pivots:
            return _K_REFACTOR, pivots, degenerate
        bland = degenerate >= bland_after
        if q >= 0 and not fresh:
            # guard against drift in the updated reduced costs
            dq = cost[q]
            for p in range(ptr[q], ptr[q + 1]):
                dq -= y[idx[p]] * val[p]
            if dq >= -opt_tol:
                q = -1
        if q < 0:
            if fresh:
                return _K_OPTIMAL, pivots, degenerate
            _fresh_reduced_costs(ptr, idx, val, cost, basis, Binv, y, d)
            fresh = True
            q = _choose_entering(d, is_basic, eligible, weights, bland, opt_tol)
            continue
        for i in range(m):
            alpha[i] = 0.0
        for p in range(ptr[q], ptr[q + 1]):
            c = idx[p]
            v = val[p]
            for i in range(m):
                alpha[i] += Binv[i, c] * v
        # ratio test
        r = -1
        step = 0.0
        if block_penalized:
            # basic artificials and fixed columns sit at zero: any nonzero entry blocks at once
            top = 0.0
            for i in range(m):
                a = abs(alpha[i])
                if penal[basis[i]] and a > piv_tol and a > top:
                    top = a
                    r = i
        if r < 0:
            theta = np.inf
            for i in range(m):
                if alpha[i] > piv_tol:
                    x = max(xB[i], 0.0)
                    t = x / alpha[i] if bland else (x + harris_tol) / alpha[i]
                    if t < theta:
                        theta = t
            if theta == np.inf:
                return _K_UNBOUNDED, pivots, degenerate
            top = 0.0
            for i in range(m):
                if alpha[i] > piv_tol:
                    t = max(xB[i], 0.0) / alpha[i]
                    if bland:
                        # smallest basic index among the minimum-ratio rows
                        if t <= theta + 1e-12 and (r < 0 or basis[i] < basis[r]):
                            r = i
                    elif t <= theta and alpha[i] > top:
                        top = alpha[i]
                        r = i
            step = max(xB[r], 0.0) / alpha[r]
        if step <= 1e-12:
            degenerate += 1
        else:
            degenerate = 0
        bland = degenerate >= bland_after
        ar = alpha[r]
        theta_d = d[q] / ar
        wq = weights[q]
        leave = basis[r]
        for k in range(m):
            work[k] = Binv[r, k]
            y[k] += theta_d * work[k]
        is_basic[q] = True
        # one pass over the nonbasic columns: pivot row, reduced costs, devex weights, next choice
        nq = -1
        best = 0.0
        wmax = 0.0
        for j in range(ntot):
            if is_basic[j]:
                continue
            rho = 0.0
            for p in range(ptr[j], ptr[j + 1]):
                rho += work[idx[p]] * val[p]
            if rho != 0.0:
                d[j] -= theta_d * rho
                if not bland:
                    w = (rho / ar) * (rho / ar) * wq
                    if w > weights[j]:
                        weights[j] = w
            if weights[j] > wmax:
                wmax = weights[j]
            if not eligible[j] or d[j] >= -opt_tol or (bland and nq >= 0):
                continue
            score = d[j] * d[j] / weights[j]
            if bland or score > best:
                best = score
                nq = j
        d[q] = 0.0
        d[leave] = -theta_d
        is_basic[leave] = False
        if not bland:
            weights[leave] = max(wq / (ar * ar), 1.0)
        if eligible[leave] and d[leave] < -opt_tol:
            if bland:
                if nq < 0 or leave < nq:
                    nq = leave
            elif nq < 0 or d[leave] * d[leave] / weights[leave] > best:
                nq = leave
        _pivot_kernel(basis, Binv, xB, alpha, r, q, step, work)
        pivots += 1
        fresh = False
        q = nq
        if wmax > 1e8:
            for j in range(ntot):
                weights[j] = 1.0
            q = _choose_entering(d, is_basic, eligible, weights, bland, opt_tol)


@numba.njit(cache=True)
def _basis_matrix(ptr, idx, val, basis):
    m = basis.size
    B = np.zeros((m, m))
    for t in range(m):
        j = basis[t]
        for p in range(ptr[j], ptr[j + 1]):
            B[idx[p], t] = val[p]
    return B


@numba.njit(cache=True)
def _matvec(ptr, idx, val, x, m):
    out = np.zeros(m)
    for j in range(ptr.size - 1):
        if x[j] != 0.0:
            for p in range(ptr[j], ptr[j + 1]):
                out[idx[p]] += val[p] * x[j]
    return out


@numba.njit(cache=True)
def _drive_out_kernel(ptr, idx, val, art0, penal, basis, Binv, xB, tol):
    """Pivot basic artificials out at zero step where some column has a pivot of at least ``tol``."""
    m = basis.size
    is_basic = np.zeros(ptr.size - 1, dtype=np.bool_)
    for i in range(m):
        is_basic[basis[i]] = True
    alpha = np.empty(m)
    work = np.empty(m)
    pivots = 0
    for r in range(m):
        if basis[r] < art0:
            continue
        q = -1
        top = tol
        for j in range(art0):
            if is_basic[j] or penal[j]:
                continue
            v = 0.0
            for p in range(ptr[j], ptr[j + 1]):
                v += Binv[r, idx[p]] * val[p]
            if abs(v) >= top:
                top = abs(v)
                q = j
        if q < 0:
            continue  # redundant row: the artificial stays, pinned at zero
        for i in range(m):
            alpha[i] = 0.0
        for p in range(ptr[q], ptr[q + 1]):
            for i in range(m):
                alpha[i] += Binv[i, idx[p]] * val[p]
        is_basic[basis[r]] = False
        is_basic[q] = True
        _pivot_kernel(basis, Binv, xB, alpha, r, q, 0.0, work)
        pivots += 1
    return pivots


class _Simplex:
    """One solve over the extended variable space [structural | surplus | artificial]."""

    def __init__(self, model: LpModel) -> None:
        self.model = model
        model._sync_sparse()
        m, N = model.num_rows, model.num_cols
        self.m, self.N = m, N
        self.sign = model._row_sign()
        self.b = self.sign * np.array(model._rhs) if m else np.zeros(0)
        surplus_rows = np.flatnonzero(np.array([s is Sense.GE for s in model._sense], dtype=bool))
        S = len(surplus_rows)
        self.art0 = N + S
        nnz = model._nnz
        self.ptr = np.concatenate([model._ptr, nnz + np.arange(1, S + m + 1)])
        self.idx = np.concatenate([model._idx[:nnz], surplus_rows, np.arange(m)])
        self.val = np.concatenate([model._val[:nnz], -self.sign[surplus_rows], np.ones(m)])
        self.ntot = N + S + m
        # artificials and fixed columns must end at zero; phase 1 minimizes their sum
        self.penal = np.concatenate([model._fixed[:N], np.zeros(S + m, dtype=bool)])
        self.penal[self.art0:] = True
        self.cost = {
            1: self.penal.astype(float),
            2: np.concatenate([np.array(model._obj, dtype=float), np.zeros(S + m)]),
        }
        self.iterations = 0

    # persistent basis <-> extended index
    def _load_basis(self) -> np.ndarray:
        mdl = self.model
        offset = np.array([0, self.N, self.art0])
        return (offset[mdl._basis_kind] + mdl._basis_idx).astype(np.int64)

    def _store_basis(self, basis: np.ndarray) -> None:
        mdl = self.model
        kind = np.where(basis >= self.art0, _ART, np.where(basis >= self.N, _SURPLUS, _STRUCT))
        offset = np.array([0, self.N, self.art0])
        mdl._basis_kind = kind.astype(np.int8)
        mdl._basis_idx = basis - offset[kind]

    def _cold_start(self) -> None:
        mdl = self.model
        mdl._basis_kind = np.full(self.m, _ART, dtype=np.int8)
        mdl._basis_idx = np.arange(self.m)
        mdl._Binv = np.eye(self.m)
        mdl._xB = self.b.copy()
        mdl._since_refactor = 0

    def _refactor(self, basis: np.ndarray) -> None:
        mdl = self.model
        try:
            mdl._Binv = np.ascontiguousarray(np.linalg.inv(_basis_matrix(self.ptr, self.idx, self.val, basis)))
        except np.linalg.LinAlgError:
            raise LpNumericalError("basis matrix became singular") from None
        mdl._xB = mdl._Binv @ self.b
        mdl._since_refactor = 0

    def run(self) -> LpResult:
        mdl = self.model
        if mdl._basis_kind is None or len(mdl._basis_kind) != self.m:
            self._cold_start()
        for attempt in range(2):
            try:
                return self._run_phases()
            except LpNumericalError:
                if attempt:
                    raise
                self._cold_start()
        raise AssertionError("unreachable")

    def _run_phases(self) -> LpResult:
        mdl = self.model
        basis = self._load_basis()
        if np.any(mdl._xB[self.penal[basis]] > FEAS_TOL):
            self._iterate(basis, phase=1)
            self._refactor(basis)
            infeas = float(np.sum(mdl._xB[self.penal[basis]]))
            if infeas > FEAS_TOL:
                self._store_basis(basis)
                return self._infeasible_result(basis)
            self._drive_out_artificials(basis)
        status = self._iterate(basis, phase=2)
        self._store_basis(basis)
        return self._final_result(basis, status)

    def _drive_out_artificials(self, basis: np.ndarray) -> None:
        """Swap zero-valued basic artificials for free columns where a safe pivot exists."""
        mdl = self.model
        self.iterations += _drive_out_kernel(self.ptr, self.idx, self.val, self.art0, self.penal, basis,
                                             mdl._Binv, mdl._xB, DRIVE_OUT_TOL)
        self._refactor(basis)

    def _iterate(self, basis: np.ndarray, phase: int) -> Status:
        mdl = self.model
        ntot = self.ntot
        limit = 50 * (self.m + ntot) + 5000
        cost = self.cost[phase]
        eligible = np.ones(ntot, dtype=bool) if phase == 1 else ~self.penal
        weights = np.ones(ntot)
        degenerate = 0
        while True:
            if self.iterations > limit:
                raise LpNumericalError("simplex iteration limit exceeded")
            if mdl._since_refactor >= REFACTOR_EVERY:
                self._refactor(basis)
            code, pivots, degenerate = _simplex_kernel(
                self.ptr, self.idx, self.val, cost, eligible, self.penal, basis, mdl._Binv, mdl._xB,
                weights, REFACTOR_EVERY - mdl._since_refactor, degenerate, DEGENERATE_LIMIT,
                phase == 2, OPT_TOL, PIVOT_TOL, HARRIS_TOL)
            self.iterations += pivots
            mdl._since_refactor += pivots
            if code == _K_OPTIMAL:
                return Status.OPTIMAL
            if code == _K_UNBOUNDED:
                if phase == 1:
                    raise LpNumericalError("phase 1 reported an unbounded ray")
                return Status.UNBOUNDED

    def _primal(self, basis: np.ndarray) -> np.ndarray:
        x = np.zeros(self.N)
        mask = basis < self.N
        x[basis[mask]] = self.model._xB[mask]
        return np.maximum(x, 0.0)

    def _final_result(self, basis: np.ndarray, status: Status) -> LpResult:
        mdl = self.model
        if status is Status.UNBOUNDED:
            return LpResult(status, -np.inf, self._primal(basis), np.zeros(self.m), iterations=self.iterations)
        self._refactor(basis)
        xB = mdl._xB
        if np.any(xB < -FEAS_TOL):
            raise LpNumericalError("basic solution lost primal feasibility")
        if np.max(np.abs(xB[self.penal[basis]]), initial=0.0) > FEAS_TOL:
            raise LpNumericalError("artificial or fixed variable left nonzero in phase 2")
        xfull = np.zeros(self.ntot)
        xfull[basis] = np.maximum(xB, 0.0)
        resid = np.max(np.abs(_matvec(self.ptr, self.idx, self.val, xfull, self.m) - self.b), initial=0.0)
        if resid > FEAS_TOL * (1 + np.max(np.abs(self.b), initial=0.0)):
            raise LpNumericalError("primal residual exceeds tolerance")
        y_hat = self.cost[2][basis] @ mdl._Binv
        x = self._primal(basis)
        duals = self.sign * y_hat * self.model.flips() if self.m else np.zeros(0)
        return LpResult(Status.OPTIMAL, float(self.cost[2][:self.N] @ x), x, duals,
                        iterations=self.iterations)

    def _infeasible_result(self, basis: np.ndarray) -> LpResult:
        y_hat = self.cost[1][basis] @ self.model._Binv
        return LpResult(Status.INFEASIBLE, np.inf, self._primal(basis), np.zeros(self.m),
                        farkas_ray=self.sign * y_hat * self.model.flips(), iterations=self.iterations)


def solve(model: LpModel) -> LpResult:
    return model.solve()


def add_column(model: LpModel, obj: float, coeffs, name: str | None = None) -> int:
    return model.add_column(obj, coeffs, name)


def add_row(model: LpModel, rhs: float, sense, coeffs, name: str | None = None) -> int:
    return model.add_row(rhs, sense, coeffs, name)


def to_lp_format(model: LpModel) -> str:
    """CPLEX LP text: ``Minimize`` / ``Subject To`` / ``End``; all variables default to >= 0."""
    def var(j: int) -> str:
        return model.col_names[j] or f"x{j}"

    def terms(pairs: list[tuple[int, float]]) -> str:
        if not pairs:
            return "0 " + var(0) if model.num_cols else "0"
        out = []
        for j, v in pairs:
            out.append(f"{'+' if v >= 0 else '-'} {abs(v):.17g} {var(j)}")
        text = " ".join(out)
        return text[2:] if text.startswith("+ ") else text

    lines = ["\\ exported by roundrobin.lp", "Minimize", " obj: " + terms(
        [(j, c) for j, c in enumerate(model._obj) if c != 0.0]), "Subject To"]
    rows: list[list[tuple[int, float]]] = [[] for _ in range(model.num_rows)]
    for j, col in enumerate(model._cols):
        for i, v in col:
            rows[i].append((j, v))
    for i, pairs in enumerate(rows):
        op = "=" if model._sense[i] is Sense.EQ else ">="
        name = model.row_names[i] or f"c{i}"
        lines.append(f" {name}: {terms(pairs)} {op} {model._rhs[i]:.17g}")
    lines.append("End")
    return "\n".join(lines) + "\n"
