"""Barrier-method solver for the small catalog of smooth convex programs used by the planners.

Every nonlinear function in the catalog is a *power ratio*

    f(x) = a * ||u(x)||**p / t(x)**q

with ``u`` an affine vector (dimension 0, 1 or 2) and ``t`` an affine scalar kept
strictly positive.  The exponent pairs (p, q) in use are

    (2, 1) quadratic-over-linear     (3, 2) cubic-over-quadratic
    (0, 1) reciprocal                (2, 0) squared norm
    (4, 2) fourth-over-square

all jointly convex for ``a > 0``.  Constraints are rows ``sum(terms) + affine <= 0``;
the log barrier of such a row is smooth wherever the row is strictly satisfied,
so a plain Newton barrier method applies.  Hessians are assembled sparse.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

BARRIER_T0 = 1.0
BARRIER_MU = 10.0
NEWTON_TOL = 1e-9
ROUNDING_FACTOR = 64.0
LS_ALPHA = 0.25
LS_BETA = 0.5
PHASE1_MARGIN = 1e-9
# rows with more nonzeros than max(DENSE_ROW_MIN, DENSE_ROW_FRAC * n) go to the low-rank part
DENSE_ROW_MIN = 40
DENSE_ROW_FRAC = 0.02
# phase-1 box half-widths, relative to 1 + |x0|, tried in turn
PHASE1_BOX = (1e3, 1e6)
PHASE1_WEIGHT = 1.0


class KernelError(RuntimeError):
    pass


# ---------------------------------------------------------------- expressions


class Affine:
    """A stack of N scalar affine forms ``row_i . x + const_i`` stored as COO triplets."""

    __slots__ = ("rows", "cols", "vals", "const")

    def __init__(self, rows, cols, vals, const):
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=float)
        self.const = np.atleast_1d(np.asarray(const, dtype=float))

    @classmethod
    def constant(cls, values) -> "Affine":
        values = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
        e = np.empty(0, dtype=np.int64)
        return cls(e, e, np.empty(0), values)

    @property
    def size(self) -> int:
        return len(self.const)

    def __len__(self):
        return self.size

    def matrix(self, n: int) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.size, n))

    def value(self, x) -> np.ndarray:
        out = self.const.copy()
        np.add.at(out, self.rows, self.vals * x[self.cols])
        return out

    def _coerce(self, other) -> "Affine":
        if isinstance(other, Affine):
            if other.size == self.size:
                return other
            if other.size == 1:
                return other.repeat(self.size)
            if self.size == 1:
                raise ValueError("broadcast a size-1 Affine on the left with .repeat()")
            raise ValueError(f"size mismatch {self.size} vs {other.size}")
        return Affine.constant(np.broadcast_to(np.asarray(other, dtype=float), (self.size,)))

    def repeat(self, n: int) -> "Affine":
        if self.size != 1:
            raise ValueError("only size-1 forms can be repeated")
        k = len(self.rows)
        rows = np.repeat(np.arange(n), k)
        return Affine(rows, np.tile(self.cols, n), np.tile(self.vals, n), np.repeat(self.const, n))

    def __add__(self, other):
        if isinstance(other, Affine) and self.size == 1 and other.size > 1:
            return self.repeat(other.size) + other
        o = self._coerce(other)
        return Affine(
            np.concatenate([self.rows, o.rows]),
            np.concatenate([self.cols, o.cols]),
            np.concatenate([self.vals, o.vals]),
            self.const + o.const,
        )

    __radd__ = __add__

    def __neg__(self):
        return Affine(self.rows, self.cols, -self.vals, -self.const)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Affine) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scale):
        scale = np.asarray(scale, dtype=float)
        if scale.ndim == 0:
            return Affine(self.rows, self.cols, self.vals * scale, self.const * scale)
        scale = np.broadcast_to(scale, (self.size,))
        return Affine(self.rows, self.cols, self.vals * scale[self.rows], self.const * scale)

    __rmul__ = __mul__

    def __getitem__(self, idx) -> "Affine":
        sel = np.atleast_1d(np.arange(self.size)[idx])
        ncol = int(self.cols.max()) + 1 if len(self.cols) else 1
        sub = self.matrix(ncol)[sel].tocoo()
        return Affine(sub.row, sub.col, sub.data, self.const[sel])

    def sum(self) -> "Affine":
        return Affine(np.zeros_like(self.rows), self.cols, self.vals, [self.const.sum()])

    @staticmethod
    def concat(items) -> "Affine":
        items = list(items)
        offs = np.cumsum([0] + [it.size for it in items])
        return Affine(
            np.concatenate([it.rows + o for it, o in zip(items, offs)]),
            np.concatenate([it.cols for it in items]),
            np.concatenate([it.vals for it in items]),
            np.concatenate([it.const for it in items]),
        )


@dataclass
class Var:
    name: str
    idx: np.ndarray  # global indices, block shape

    @property
    def shape(self):
        return self.idx.shape

    def __getitem__(self, key) -> Affine:
        cols = np.atleast_1d(self.idx[key]).ravel()
        n = len(cols)
        return Affine(np.arange(n), cols, np.ones(n), np.zeros(n))

    @property
    def all(self) -> Affine:
        return self[...]


@dataclass
class Term:
    """Vectorized power ratio ``coef * ||u||**p / t**q`` over N instances."""

    p: int
    q: int
    coef: np.ndarray
    u: list = field(default_factory=list)  # list of d Affine, each size N
    t: Affine | None = None

    @property
    def size(self) -> int:
        return len(self.coef)


def _as_vec(u) -> list:
    return list(u) if isinstance(u, (list, tuple)) else [u]


def _n_of(u, t):
    return (u[0].size if u else t.size)


def quad_over_lin(u, t, coef=1.0) -> Term:
    u = _as_vec(u)
    return Term(2, 1, np.broadcast_to(np.asarray(coef, float), (_n_of(u, t),)).copy(), u, t)


def cubic_over_quad(u, t, coef=1.0) -> Term:
    u = _as_vec(u)
    return Term(3, 2, np.broadcast_to(np.asarray(coef, float), (_n_of(u, t),)).copy(), u, t)


def reciprocal(t, coef=1.0) -> Term:
    return Term(0, 1, np.broadcast_to(np.asarray(coef, float), (t.size,)).copy(), [], t)


def sq_norm(u, coef=1.0) -> Term:
    u = _as_vec(u)
    return Term(2, 0, np.broadcast_to(np.asarray(coef, float), (u[0].size,)).copy(), u, None)


def fourth_over_square(u, t, coef=1.0) -> Term:
    return Term(4, 2, np.broadcast_to(np.asarray(coef, float), (t.size,)).copy(), [u], t)


# ---------------------------------------------------------------- program


class ConvexProgram:
    """Builder for a catalog program: named variable blocks, objective, constraint rows."""

    def __init__(self):
        self.n = 0
        self.vars: dict[str, Var] = {}
        self._lb: list[np.ndarray] = []
        self._x0: list[np.ndarray] = []
        self.obj_affine: list[Affine] = []
        self.obj_terms: list[Term] = []
        self.row_affine: list[Affine] = []
        self.row_terms: list[tuple[Term, np.ndarray]] = []
        self.row_labels: list[tuple[str, int]] = []
        self.n_rows = 0
        self.eqs: list[Affine] = []
        self.eq_labels: list[tuple[str, int]] = []
        self.epigraphs: list[tuple[Var, list]] = []

    # variables -----------------------------------------------------
    def variable(self, name, shape=(), lb=None, init=None) -> Var:
        if name in self.vars:
            raise ValueError(f"duplicate variable {name!r}")
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        size = int(np.prod(shape)) if shape else 1
        idx = np.arange(self.n, self.n + size).reshape(shape)
        self.n += size
        lbv = np.full(size, -np.inf) if lb is None else np.broadcast_to(np.asarray(lb, float), shape).ravel().copy()
        if init is None:
            x0 = np.where(np.isfinite(lbv), lbv + 1.0, 0.0)
        else:
            x0 = np.broadcast_to(np.asarray(init, float), shape).ravel().copy()
        self._lb.append(lbv)
        self._x0.append(x0)
        v = Var(name, idx)
        self.vars[name] = v
        return v

    @property
    def lb(self) -> np.ndarray:
        return np.concatenate(self._lb) if self._lb else np.empty(0)

    @property
    def x0(self) -> np.ndarray:
        return np.concatenate(self._x0) if self._x0 else np.empty(0)

    def set_init(self, var: Var, values):
        x0 = self.x0
        x0[var.idx.ravel()] = np.broadcast_to(np.asarray(values, float), var.shape).ravel()
        # rebuild the per-block list so later blocks keep their values
        sizes = [len(b) for b in self._x0]
        self._x0 = list(np.split(x0, np.cumsum(sizes)[:-1]))

    # objective -----------------------------------------------------
    def minimize(self, *items):
        for it in items:
            if isinstance(it, Term):
                self.obj_terms.append(it)
            elif isinstance(it, Affine):
                self.obj_affine.append(it.sum())
            else:
                raise TypeError(f"objective items must be Term or Affine, not {type(it)}")

    # constraints ---------------------------------------------------
    def _new_rows(self, n, label):
        rows = np.arange(self.n_rows, self.n_rows + n)
        self.n_rows += n
        self.row_labels.append((label, n))
        return rows

    def convex_leq(self, terms, rhs, label="convex"):
        """Rows ``sum(terms)_i <= rhs_i``."""
        terms = list(terms)
        n = rhs.size if isinstance(rhs, Affine) else terms[0].size
        rows = self._new_rows(n, label)
        rhs = rhs if isinstance(rhs, Affine) else Affine.constant(np.broadcast_to(rhs, (n,)))
        aff = -rhs
        self.row_affine.append(Affine(aff.rows + rows[0], aff.cols, aff.vals, aff.const))
        for t in terms:
            if t.size != n:
                raise ValueError(f"term size {t.size} does not match {n} rows")
            self.row_terms.append((t, rows))
        return rows

    def affine_leq(self, lhs: Affine, rhs=0.0, label="affine"):
        return self.convex_leq([], Affine.constant(np.zeros(lhs.size)) + rhs - lhs, label)

    def affine_eq(self, lhs: Affine, rhs=0.0, label="eq"):
        e = lhs - rhs
        self.eq_labels.append((label, e.size))
        self.eqs.append(e)

    def norm_leq(self, u, s: Affine, label="norm"):
        """``||u_i|| <= s_i`` written as ``||u||^2/s - s <= 0`` on ``s > 0``."""
        u = _as_vec(u)
        return self.convex_leq([quad_over_lin(u, s)], s, label)

    def sum_norms_leq(self, u, s: Affine, label="sum_norms"):
        """``sum_i ||u_i|| <= s`` via per-norm epigraph variables."""
        u = _as_vec(u)
        n = u[0].size
        name = f"_{label}_{len(self.vars)}"
        d = self.variable(name, (n,))
        self.epigraphs.append((d, u))
        self.norm_leq(u, d.all, label=f"{label}.norm")
        self.affine_leq(d.all.sum() - s, 0.0, label=f"{label}.sum")
        return d

    def sqnorm_leq(self, u, s: Affine, label="sqnorm"):
        return self.convex_leq([sq_norm(_as_vec(u))], s, label)

    def qol_leq(self, u, t: Affine, rhs: Affine, label="qol"):
        return self.convex_leq([quad_over_lin(_as_vec(u), t)], rhs, label)

    def fos_leq(self, u: Affine, t: Affine, rhs: Affine, label="fos"):
        return self.convex_leq([fourth_over_square(u, t)], rhs, label)

    # helpers -------------------------------------------------------
    def unpack(self, x) -> dict[str, np.ndarray]:
        return {k: x[v.idx] for k, v in self.vars.items() if not k.startswith("_")}

    def dump(self) -> str:
        """Plain-text canonical listing, one item per line."""

        def aff_str(a: Affine, i: int) -> str:
            m = a.rows == i
            parts = [f"{v:+.17g}*x{c}" for c, v in zip(a.cols[m], a.vals[m])]
            parts.append(f"{a.const[i]:+.17g}")
            return " ".join(parts)

        names = {}
        for v in self.vars.values():
            for j, g in enumerate(v.idx.ravel()):
                names[g] = f"{v.name}[{j}]"
        lines = [f"var x{i} {names[i]} lb={lb:.17g}" for i, lb in enumerate(self.lb)]
        for a in self.obj_affine:
            lines.append(f"obj affine {aff_str(a, 0)}")
        for t in self.obj_terms:
            for i in range(t.size):
                lines.append(f"obj {_term_str(t, i, aff_str)}")
        A, b = _row_matrix(self, self.n)
        for r in range(self.n_rows):
            row = A.getrow(r).tocoo()
            lines.append(f"row {r} affine {aff_str(Affine(np.zeros(row.nnz), row.col, row.data, [b[r]]), 0)}")
        for t, rows in self.row_terms:
            for i in range(t.size):
                lines.append(f"row {rows[i]} {_term_str(t, i, aff_str)}")
        for e in self.eqs:
            for i in range(e.size):
                lines.append(f"eq {aff_str(e, i)}")
        return "\n".join(lines) + "\n"


def _row_matrix(prog: ConvexProgram, n: int):
    """Affine parts of all rows; ``row_affine`` entries already carry global row ids."""
    if not prog.row_affine:
        return sp.csr_matrix((0, n)), np.zeros(0)
    rows = np.concatenate([a.rows for a in prog.row_affine])
    cols = np.concatenate([a.cols for a in prog.row_affine])
    vals = np.concatenate([a.vals for a in prog.row_affine])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(prog.n_rows, n))
    return A, np.concatenate([a.const for a in prog.row_affine])


def _term_str(t: Term, i, aff_str):
    us = ", ".join(f"({aff_str(u, i)})" for u in t.u)
    ts = f"({aff_str(t.t, i)})" if t.t is not None else "1"
    return f"power p={t.p} q={t.q} coef={t.coef[i]:.17g} u=[{us}] t={ts}"


# ---------------------------------------------------------------- compiled form


class _Group:
    """Terms sharing (p, q, d) compiled into one local-coordinate Jacobian."""

    def __init__(self, p, q, d, has_t, coef, J, c, rows):
        self.p, self.q, self.d, self.has_t = p, q, d, has_t
        self.D = d + (1 if has_t else 0)
        self.coef = coef
        self.J = J.tocsr()
        self.JT = self.J.T.tocsr()
        self.c = c
        self.rows = rows  # None for objective groups
        self.N = len(coef)
        N, D = self.N, self.D
        self._blk_rows = np.repeat(np.arange(N * D).reshape(N, D), D, axis=1).ravel()
        self._blk_cols = np.tile(np.arange(N * D).reshape(N, D), (1, D)).ravel()
        self._g_rows = np.repeat(np.arange(N), D)
        self._g_cols = np.arange(N * D)

    def local(self, x):
        Z = (self.J @ x + self.c).reshape(self.N, self.D)
        u = Z[:, : self.d]
        t = Z[:, self.d] if self.has_t else None
        return u, t

    def denominators(self, x):
        return self.local(x)[1]

    def value(self, x):
        u, t = self.local(x)
        v = self.coef.copy()
        if self.d:
            r = np.sqrt(np.sum(u * u, axis=1))
            v = v * r**self.p
        if self.has_t:
            v = v / t**self.q
        return v

    def derivs(self, x):
        """Values, local gradients (N, D) and local Hessians (N, D, D)."""
        p, q, d = self.p, self.q, self.d
        u, t = self.local(x)
        a = self.coef
        N, D = self.N, self.D
        tq = t**q if self.has_t else np.ones(N)
        if d:
            r2 = np.sum(u * u, axis=1)
            r = np.sqrt(r2)
            rp = r**p
            rp2 = r ** (p - 2)
        else:
            rp = np.ones(N)
        val = a * rp / tq
        g = np.zeros((N, D))
        H = np.zeros((N, D, D))
        if d:
            g[:, :d] = (a * p * rp2 / tq)[:, None] * u
            eye = np.eye(d)[None]
            if p == 2:
                outer = 0.0
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    w = np.where(r > 0, (p - 2) * r ** (p - 4.0), 0.0)
                outer = w[:, None, None] * u[:, :, None] * u[:, None, :]
            H[:, :d, :d] = (a * p / tq)[:, None, None] * (rp2[:, None, None] * eye + outer)
        if self.has_t:
            g[:, d] = -q * a * rp / (tq * t)
            H[:, d, d] = q * (q + 1) * a * rp / (tq * t * t)
            if d:
                cross = (-q * a * p * rp2 / (tq * t))[:, None] * u
                H[:, :d, d] = cross
                H[:, d, :d] = cross
        return val, g, H

    def hess_x(self, H, weights):
        Hw = (H * weights[:, None, None]).ravel()
        Hb = sp.csr_matrix((Hw, (self._blk_rows, self._blk_cols)), shape=(self.N * self.D,) * 2)
        return self.JT @ Hb @ self.J

    def grad_rows_x(self, g):
        """Sparse (N x n) matrix of per-instance gradients with respect to x."""
        Gb = sp.csr_matrix((g.ravel(), (self._g_rows, self._g_cols)), shape=(self.N, self.N * self.D))
        return Gb @ self.J


def _compile_group(terms, n, rows_list=None):
    """Stack same-shape terms into a _Group."""
    t0 = terms[0]
    d, has_t = len(t0.u), t0.t is not None
    D = d + (1 if has_t else 0)
    blocks, consts, coefs, rows = [], [], [], []
    for k, t in enumerate(terms):
        comps = list(t.u) + ([t.t] if has_t else [])
        N = t.size
        mats = [c.matrix(n) for c in comps]
        # interleave components: row i*D + j
        M = sp.vstack(mats).tocsr()
        perm = np.arange(N * D).reshape(D, N).T.ravel()
        blocks.append(M[perm])
        consts.append(np.stack([c.const for c in comps], axis=1).ravel())
        coefs.append(t.coef)
        if rows_list is not None:
            rows.append(rows_list[k])
    J = sp.vstack(blocks).tocsr()
    return _Group(
        t0.p, t0.q, d, has_t, np.concatenate(coefs), J, np.concatenate(consts),
        np.concatenate(rows) if rows_list is not None else None,
    )


def _group_terms(terms, rows=None):
    buckets: dict = {}
    for i, t in enumerate(terms):
        key = (t.p, t.q, len(t.u), t.t is not None)
        buckets.setdefault(key, []).append(i)
    return [
        ([terms[i] for i in idx], [rows[i] for i in idx] if rows is not None else None)
        for idx in buckets.values()
    ]


class _Compiled:
    def __init__(self, n, c, c0, obj_groups, con_groups, A_rows, b_rows, lb, E, e):
        self.n = n
        self.c, self.c0 = c, c0
        self.obj_groups = obj_groups
        self.con_groups = con_groups
        self.A_rows = A_rows.tocsr()
        self.b_rows = b_rows
        self.n_rows = A_rows.shape[0]
        self.lb = lb
        self.has_lb = np.isfinite(lb)
        self.E = E.tocsr() if E is not None and E.shape[0] else None
        self.e = e
        self.den_groups = [g for g in obj_groups + con_groups if g.has_t]
        self.sigma = 1.0

    def scale_objective(self, sigma: float):
        """Multiply the objective by sigma (the barrier then starts at an effective t = sigma)."""
        self.c = self.c * sigma
        self.c0 *= sigma
        for g in self.obj_groups:
            g.coef = g.coef * sigma
        self.sigma *= sigma

    @classmethod
    def from_program(cls, prog: ConvexProgram):
        n = prog.n
        c = np.zeros(n)
        c0 = 0.0
        for a in prog.obj_affine:
            np.add.at(c, a.cols, a.vals)
            c0 += float(a.const.sum())
        obj_groups = [_compile_group(ts, n) for ts, _ in _group_terms(prog.obj_terms)]
        terms = [t for t, _ in prog.row_terms]
        rows = [r for _, r in prog.row_terms]
        con_groups = [_compile_group(ts, n, rs) for ts, rs in _group_terms(terms, rows)] if terms else []
        A, b = _row_matrix(prog, n)
        if prog.eqs:
            ea = Affine.concat(prog.eqs)
            E, e = ea.matrix(n), -ea.const
        else:
            E, e = None, np.zeros(0)
        return cls(n, c, c0, obj_groups, con_groups, A, b, prog.lb, E, e)

    def phase1(self, x0=None, radius=None):
        """Program over (x, s): minimize s subject to rows(x) <= s.

        With ``x0`` and ``radius`` the search is confined to the box
        |x - x0| <= radius, which keeps the centering problems bounded when a
        variable could otherwise grow without limit to enlarge one row's slack.
        """
        n1 = self.n + 1

        def widen(g):
            J = sp.hstack([g.J, sp.csr_matrix((g.J.shape[0], 1))]).tocsr()
            return _Group(g.p, g.q, g.d, g.has_t, g.coef, J, g.c, g.rows)

        A = sp.hstack([self.A_rows, -np.ones((self.n_rows, 1))]).tocsr()
        b = self.b_rows
        if x0 is not None:
            n = self.n
            I = sp.eye(n, n1, format="csr")
            A = sp.vstack([A, I, -I]).tocsr()
            b = np.concatenate([b, -x0 - radius, x0 - radius])
        c = np.zeros(n1)
        c[-1] = 1.0
        lb = np.concatenate([self.lb, [-np.inf]])
        E = sp.hstack([self.E, sp.csr_matrix((self.E.shape[0], 1))]) if self.E is not None else None
        return _Compiled(n1, c, 0.0, [], [widen(g) for g in self.con_groups], A, b, lb, E, self.e)

    # evaluation ----------------------------------------------------
    def objective(self, x):
        v = self.c0 + self.c @ x
        for g in self.obj_groups:
            v += g.value(x).sum()
        return v

    def rows(self, x):
        f = self.A_rows @ x + self.b_rows
        for g in self.con_groups:
            f += np.bincount(g.rows, weights=g.value(x), minlength=self.n_rows)
        return f

    def domain_ok(self, x, f=None):
        if np.any(x[self.has_lb] <= self.lb[self.has_lb]):
            return False
        for g in self.den_groups:
            if np.any(g.denominators(x) <= 0):
                return False
        if f is None:
            f = self.rows(x)
        return bool(np.all(f < 0))

    def barrier_value(self, x, tb):
        f = self.rows(x)
        if not self.domain_ok(x, f):
            return np.inf
        slack = x[self.has_lb] - self.lb[self.has_lb]
        return tb * self.objective(x) - np.sum(np.log(-f)) - np.sum(np.log(slack))

    def barrier_derivs(self, x, tb):
        n = self.n
        grad = tb * self.c.copy()
        H = sp.csr_matrix((n, n))
        for g in self.obj_groups:
            _, gl, Hl = g.derivs(x)
            grad += tb * (g.JT @ gl.ravel())
            H = H + g.hess_x(Hl, np.full(g.N, tb))
        f = self.A_rows @ x + self.b_rows
        pieces = []
        for g in self.con_groups:
            val, gl, Hl = g.derivs(x)
            f += np.bincount(g.rows, weights=val, minlength=self.n_rows)
            pieces.append((g, gl, Hl))
        inv = -1.0 / f  # positive inside the domain
        Jc = self.A_rows.copy()
        for g, gl, Hl in pieces:
            G = g.grad_rows_x(gl)
            P = sp.csr_matrix((np.ones(g.N), (g.rows, np.arange(g.N))), shape=(self.n_rows, g.N))
            Jc = Jc + P @ G
            H = H + g.hess_x(Hl, inv[g.rows])
        Jc = Jc.tocsr()
        grad += Jc.T @ inv
        # rows touching many variables would fill the Hessian; keep them as a low-rank part
        dense = np.diff(Jc.indptr) > max(DENSE_ROW_MIN, DENSE_ROW_FRAC * n)
        w = inv**2
        if dense.any():
            Js = Jc[~dense]
            H = H + Js.T @ sp.diags(w[~dense]) @ Js
            low = (Jc[dense], w[dense])
        else:
            H = H + Jc.T @ sp.diags(w) @ Jc
            low = None
        m = self.has_lb
        slack = np.where(m, x - np.where(m, self.lb, 0.0), 1.0)
        grad -= np.where(m, 1.0 / slack, 0.0)
        H = H + sp.diags(np.where(m, 1.0 / slack**2, 0.0))
        return grad, H.tocsc(), low

    @property
    def m_ineq(self):
        return self.n_rows + int(self.has_lb.sum())


# ---------------------------------------------------------------- solver


@dataclass
class KernelSolution:
    values: dict
    x: np.ndarray
    objective: float
    status: str  # "optimal" | "infeasible" | "max-iters"
    feas_residual: float
    opt_residual: float
    trace: list = field(default_factory=list)  # objective after each centering
    newton_steps: int = 0


def _factor(K, n):
    scale = max(abs(K[:n, :n]).max(), 1.0)
    for reg in (0.0, 1e-14, 1e-11, 1e-8):
        try:
            if reg:
                D = sp.diags(np.concatenate([np.full(n, reg * scale), np.zeros(K.shape[0] - n)]))
                return splu((K + D).tocsc(), permc_spec="MMD_AT_PLUS_A")
            return splu(K, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError:
            continue
    raise KernelError("singular Newton system")


def _solve_kkt(H, g, E=None, r_pri=None, low=None):
    """Newton step from (H + A^T diag(w) A) dx + E^T nu = -g, E dx = -r_pri.

    ``low = (A, w)`` holds the few dense rows; they are applied with the
    Woodbury identity so the sparse factorization never sees them.
    """
    n = H.shape[0]
    if E is None:
        K = H.tocsc()
        rhs = -g
    else:
        K = sp.bmat([[H, E.T], [E, None]], format="csc")
        rhs = -np.concatenate([g, r_pri])
    lu = _factor(K, n)
    sol = lu.solve(rhs)
    if low is not None:
        Ad, w = low
        U = np.zeros((K.shape[0], Ad.shape[0]))
        U[:n] = Ad.T.toarray()
        Z = lu.solve(U)
        S = np.diag(1.0 / w) + U.T @ Z
        sol = sol - Z @ np.linalg.solve(S, U.T @ sol)
    if not np.all(np.isfinite(sol)):
        raise KernelError("non-finite Newton step")
    return sol[:n], sol[n:]


def _center(C: _Compiled, x, nu, tb, max_steps, stop=None):
    """Newton centering (infeasible start for equalities). Returns (x, nu, steps, ok)."""
    steps = 0
    for steps in range(1, max_steps + 1):
        g, H, low = C.barrier_derivs(x, tb)
        if C.E is not None:
            r_pri = C.E @ x - C.e
            dx, nu_new = _solve_kkt(H, g, C.E, r_pri, low)
            dnu = nu_new - nu
            primal_ok = np.max(np.abs(r_pri), initial=0.0) <= 1e-12 * (1 + np.max(np.abs(C.e), initial=0.0))
        else:
            dx, _ = _solve_kkt(H, g, low=low)
            dnu = None
            r_pri = None
            primal_ok = True
        lam2 = float(-g @ dx) if primal_ok else np.inf
        if primal_ok:
            phi0 = C.barrier_value(x, tb)
            # decrements below the rounding level of the barrier value cannot be resolved
            if lam2 / 2 <= max(NEWTON_TOL, ROUNDING_FACTOR * np.finfo(float).eps * abs(phi0)):
                return x, nu, steps, True
        a = 1.0
        while not C.domain_ok(x + a * dx):
            a *= LS_BETA
            if a < 1e-16:
                return x, nu, steps, False
        if primal_ok:
            slope = float(g @ dx)
            while C.barrier_value(x + a * dx, tb) > phi0 + LS_ALPHA * a * slope:
                a *= LS_BETA
                if a < 1e-16:
                    return x, nu, steps, lam2 / 2 <= 1e-6
        else:
            def resid(xx, nn):
                gg = C.barrier_derivs(xx, tb)[0]
                return np.linalg.norm(np.concatenate([gg + C.E.T @ nn, C.E @ xx - C.e]))

            r0 = resid(x, nu)
            while resid(x + a * dx, nu + a * dnu) > (1 - LS_ALPHA * a) * r0:
                a *= LS_BETA
                if a < 1e-16:
                    return x, nu, steps, False
        log.debug("newton t=%.3g step %d: decrement %.3e, step size %.3g", tb, steps, lam2 / 2, a)
        x = x + a * dx
        if dnu is not None:
            nu = nu + a * dnu
        if stop is not None and stop(x):
            return x, nu, steps, True
    return x, nu, steps, False


def _barrier(C: _Compiled, x, opt_tol, max_newton, stop=None):
    nu = np.zeros(C.E.shape[0]) if C.E is not None else None
    tb = BARRIER_T0
    trace = []
    total = 0
    m = max(C.m_ineq, 1)
    while True:
        x, nu, steps, ok = _center(C, x, nu, tb, max(max_newton - total, 1), stop)
        total += steps
        obj = C.objective(x) / C.sigma
        trace.append(obj)
        if stop is not None and stop(x):
            return x, trace, total, "stopped"
        if m / (tb * C.sigma) <= opt_tol * (1 + abs(obj)):
            return x, trace, total, "optimal"
        if total >= max_newton:
            return x, trace, total, "max-iters"
        tb *= BARRIER_MU


def solve(prog: ConvexProgram, settings=None, x0=None) -> KernelSolution:
    """Minimize ``prog`` to the kernel tolerances in ``settings``."""
    feas_tol = getattr(settings, "kernel_feas_tol", 1e-6)
    opt_tol = getattr(settings, "kernel_opt_tol", 1e-6)
    max_newton = getattr(settings, "kernel_max_newton", 400)
    C = _Compiled.from_program(prog)
    x = prog.x0.copy() if x0 is None else np.asarray(x0, float).copy()
    lb = C.lb
    fin = np.isfinite(lb)
    x[fin] = np.maximum(x[fin], lb[fin] + np.maximum(1e-6, 1e-6 * np.abs(lb[fin])))
    # epigraph helpers start just above the norms they bound
    for d, u in prog.epigraphs:
        r = np.sqrt(sum(c.value(x) ** 2 for c in u))
        x[d.idx] = r * (1 + 1e-3) + 1e-3
    steps = 0
    _lift_denominators(C, x)
    if not _denominators_ok(C, x):
        raise KernelError("initial point has non-positive denominators")
    f = C.rows(x)
    if np.any(f >= 0):
        s0 = max(float(np.max(f)), 0.0) + 1.0

        def done(z):
            return z[-1] < -PHASE1_MARGIN * (1 + s0)

        for scale in PHASE1_BOX:
            P1 = C.phase1(x, scale * (1.0 + np.abs(x)))
            P1.scale_objective(PHASE1_WEIGHT * P1.m_ineq / s0)
            xs, _, st, status = _barrier(P1, np.concatenate([x, [s0]]), opt_tol, max_newton, stop=done)
            steps += st
            if status == "stopped":
                break
        if status != "stopped":
            s_star = float(xs[-1])
            return KernelSolution(
                prog.unpack(xs[:-1]), xs[:-1], float("nan"),
                "infeasible" if status == "optimal" else "max-iters",
                max(s_star, 0.0), float("inf"), [], steps,
            )
        x = xs[:-1]
    # normalize so the first centering weighs objective and barrier comparably
    C.scale_objective(max(C.m_ineq, 1) / max(abs(C.objective(x)), 1.0))
    x, trace, st, status = _barrier(C, x, opt_tol, max(max_newton - steps, 1))
    steps += st
    obj = C.objective(x) / C.sigma
    f = C.rows(x)
    feas = max(float(np.max(f, initial=-np.inf)), 0.0)
    if C.E is not None:
        feas = max(feas, float(np.max(np.abs(C.E @ x - C.e))))
    feas = max(feas, float(np.max(lb[fin] - x[fin], initial=0.0)))
    # the last centering's t is the one that met (or failed) the gap test
    tb = BARRIER_T0 * BARRIER_MU ** (len(trace) - 1)
    opt_res = C.m_ineq / (tb * C.sigma) / (1 + abs(obj))
    if status == "optimal" and feas > feas_tol:
        status = "max-iters"
    return KernelSolution(prog.unpack(x), x, float(obj), status, feas, opt_res, trace, steps)


def _denominators_ok(C, x):
    return all(np.all(g.denominators(x) > 0) for g in C.den_groups)


def _lift_denominators(C, x):
    """Raise single-variable denominators that start non-positive (e.g. free epigraph variables)."""
    for g in C.den_groups:
        u, t = g.local(x)
        bad = np.flatnonzero(t <= 0)
        if not len(bad):
            continue
        r = np.sqrt(np.sum(u * u, axis=1)) if g.d else np.zeros(g.N)
        for i in bad:
            row = g.J.getrow(i * g.D + g.d)
            if row.nnz != 1 or row.data[0] <= 0:
                continue
            j = row.indices[0]
            target = 1.0 + r[i]
            x[j] += (target - t[i]) / row.data[0]
