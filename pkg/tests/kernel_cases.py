"""Randomized small catalog programs paired with independent optima.

Each builder takes a numpy Generator and returns (program, optimum, violation)
where ``violation(values)`` re-evaluates every constraint of the program with
plain expressions and returns the largest violation.
"""
import math

import numpy as np
from scipy.optimize import minimize

from uavplan import kernel as kn

import oracles

LOG2E = 1.0 / math.log(2.0)


def _polish_2d(f, lo, hi, n=121):
    """Global minimum of a convex 2-D function: coarse grid, then Nelder-Mead."""
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    X, Y = np.meshgrid(xs, ys)
    V = np.vectorize(lambda a, b: f(np.array([a, b])))(X, Y)
    i = np.unravel_index(np.argmin(V), V.shape)
    x0 = np.array([X[i], Y[i]])
    best = None
    for start in (x0, x0 + 1e-3):
        r = minimize(f, start, method="Nelder-Mead",
                     options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 20000, "maxfev": 40000})
        if best is None or r.fun < best.fun:
            best = r
    return float(best.fun), best.x


def hover_case(rng):
    """Fly to a hover point then hover: E0*D + a/eta, rate tangent at z0."""
    H, g0 = 100.0, 1e6
    w = rng.uniform(100, 700, 2)
    qI = np.zeros(2)
    qF = rng.uniform(0, 800, 2) if rng.random() < 0.7 else None
    E0 = rng.uniform(20, 40)
    a = rng.uniform(1e3, 5e5)
    z0 = rng.uniform(0, 200) ** 2
    A0 = H**2 + z0
    R0 = math.log2(1 + g0 / A0)
    rho = -g0 * LOG2E / (A0 * (A0 + g0))

    p = kn.ConvexProgram()
    D = p.variable("D", (), lb=0.0, init=4000.0)
    q = p.variable("q", (2,), init=w)
    z = p.variable("z", (), init=z0 + 1.0)
    eta = p.variable("eta", (), lb=1e-9, init=1e-3)
    p.minimize(D.all * E0, kn.reciprocal(eta.all, a))
    xs = [kn.Affine.constant([qI[0]]), q[[0]]]
    ys = [kn.Affine.constant([qI[1]]), q[[1]]]
    if qF is not None:
        xs.append(kn.Affine.constant([qF[0]]))
        ys.append(kn.Affine.constant([qF[1]]))
    X, Y = kn.Affine.concat(xs), kn.Affine.concat(ys)
    n = X.size
    p.sum_norms_leq([X[1:n] - X[0:n - 1], Y[1:n] - Y[0:n - 1]], D.all)
    p.sqnorm_leq([q[[0]] - w[0], q[[1]] - w[1]], z.all)
    p.affine_leq(eta.all - z.all * rho, R0 - rho * z0)

    def legs(x):
        L = np.linalg.norm(x - qI)
        return L + (np.linalg.norm(qF - x) if qF is not None else 0.0)

    def f(x):
        e = R0 + rho * (np.sum((x - w) ** 2) - z0)
        return E0 * legs(x) + a / e if e > 0 else 1e30

    opt, _ = _polish_2d(f, np.minimum(w, 0) - 50, np.maximum(w, 800) + 50)

    def viol(v):
        qq = v["q"]
        return max(
            legs(qq) - v["D"],
            np.sum((qq - w) ** 2) - v["z"],
            v["eta"] - (R0 + rho * (v["z"] - z0)),
            1e-9 - v["eta"],
            -v["D"],
        )

    return p, opt, viol


def segment_case(rng):
    """One flight segment of fixed length: choose duration and induced slack."""
    P0, Pi, U, c3 = rng.uniform(300, 800), rng.uniform(300, 1000), 200.0, rng.uniform(0.01, 0.1)
    delta = rng.uniform(0, 20)
    v0 = rng.uniform(5, 10)
    yl = rng.uniform(0.2, 3)
    cst = yl**2 - (delta / v0) ** 2 * rng.uniform(0, 0.5)
    t_lo = rng.uniform(1e-3, 0.5) if rng.random() < 0.5 else 1e-3

    p = kn.ConvexProgram()
    T = p.variable("T", (), lb=1e-3, init=1.0)
    y = p.variable("y", (), lb=1e-6, init=yl)
    u = [kn.Affine.constant([delta])]
    p.minimize(T.all * P0, kn.quad_over_lin(u, T.all, 3 * P0 / U**2), y.all * Pi,
               kn.cubic_over_quad(u, T.all, c3))
    rhs = y.all * (2 * yl) - cst
    p.fos_leq(T.all, y.all, rhs)
    p.affine_leq(-T.all, -t_lo)

    def y_min(t):
        g = lambda yy: t**4 / yy**2 - (2 * yl * yy - cst)  # noqa: E731
        lo = max(cst / (2 * yl), 0.0) + 1e-300
        lo = max(lo, 1e-6)
        if g(lo) <= 0:
            return lo
        hi = lo + 1.0
        while g(hi) > 0:
            hi *= 2
        return oracles.bisect(g, lo, hi, tol=1e-15)

    def f(t):
        return P0 * t + 3 * P0 * delta**2 / (U**2 * t) + Pi * y_min(t) + c3 * delta**3 / t**2

    lo = max(t_lo, 1e-3)
    _, opt = oracles.golden_min(f, lo, 100.0, tol=1e-13)
    opt = min(opt, f(lo))

    def viol(v):
        t, yy = float(v["T"]), float(v["y"])
        return max(t**4 / yy**2 - (2 * yl * yy - cst), t_lo - t, 1e-3 - t, 1e-6 - yy)

    return p, opt, viol


def allocation_case(rng):
    """Time-share a window among segments with square-root returns (closed form)."""
    n = int(rng.integers(2, 6))
    c = rng.uniform(0.1, 2, n)
    R = rng.uniform(0.5, 7, n)
    Tw = rng.uniform(1, 50)
    p = kn.ConvexProgram()
    A = p.variable("A", (n,), init=0.0)
    tau = p.variable("tau", (n,), lb=1e-9, init=Tw / (2 * n))
    p.minimize(A.all * (-c))
    p.qol_leq([A.all], tau.all, kn.Affine.constant(R))
    p.affine_leq(tau.all.sum(), Tw)
    opt = -math.sqrt(Tw * float(np.sum(c**2 * R)))

    def viol(v):
        a, t = v["A"], v["tau"]
        return max(float(np.max(a**2 / t - R)), float(t.sum() - Tw), float(np.max(1e-9 - t)))

    return p, opt, viol


def weber_case(rng):
    """Weighted geometric median via a sum-of-norms epigraph."""
    n = int(rng.integers(3, 7))
    P = rng.uniform(-100, 100, (n, 2))
    wts = rng.uniform(0.2, 3, n)
    p = kn.ConvexProgram()
    x = p.variable("x", (2,), init=rng.uniform(-10, 10, 2))
    s = p.variable("s", (), init=1e4)
    ux = kn.Affine.concat([(x[[0]] - P[i, 0]) * wts[i] for i in range(n)])
    uy = kn.Affine.concat([(x[[1]] - P[i, 1]) * wts[i] for i in range(n)])
    p.minimize(s.all)
    p.sum_norms_leq([ux, uy], s.all)
    xm = oracles.weiszfeld(P, wts)
    opt = float(np.sum(wts * np.linalg.norm(P - xm, axis=1)))

    def viol(v):
        return float(np.sum(wts * np.linalg.norm(P - v["x"], axis=1)) - v["s"])

    return p, opt, viol


def rate_case(rng):
    """Reciprocal of a concave-bounded rate traded against distance to a second point."""
    a = rng.uniform(1, 100)
    b, e = rng.uniform(0.1, 5), rng.uniform(0.1, 5)
    beta = rng.uniform(1e-4, 1e-2)
    Rc = rng.uniform(2, 8)
    pp = rng.uniform(-20, 20, 2)
    cc = pp + rng.uniform(-30, 30, 2)
    p = kn.ConvexProgram()
    x = p.variable("x", (2,), init=pp)
    t = p.variable("t", (), lb=1e-6, init=1.0)
    eta = p.variable("eta", (), lb=1e-9, init=1e-3)
    p.minimize(kn.reciprocal(eta.all, a), kn.quad_over_lin([x[[0]] - cc[0], x[[1]] - cc[1]], t.all, b),
               t.all * e)
    p.convex_leq([kn.sq_norm([x[[0]] - pp[0], x[[1]] - pp[1]], beta)], Rc - eta.all)

    def f(xx):
        et = Rc - beta * np.sum((xx - pp) ** 2)
        r = np.linalg.norm(xx - cc)
        # inner minimum over t >= 1e-6 of b r^2/t + e t
        tt = max(math.sqrt(b / e) * r, 1e-6)
        return a / et + b * r**2 / tt + e * tt if et > 0 else 1e30

    lo = np.minimum(pp, cc) - 40
    hi = np.maximum(pp, cc) + 40
    opt, _ = _polish_2d(f, lo, hi)

    def viol(v):
        xx = v["x"]
        return max(float(v["eta"] + beta * np.sum((xx - pp) ** 2) - Rc), 1e-6 - float(v["t"]),
                   1e-9 - float(v["eta"]))

    return p, opt, viol


def cubic_case(rng):
    """Parasite-like cost of a pinned displacement against a linear time cost."""
    d = rng.uniform(1, 30, 2)
    a0 = rng.uniform(-50, 50, 2)
    c = rng.uniform(0.01, 1)
    pw = rng.uniform(10, 1000)
    L = float(np.linalg.norm(d))
    T_free = (2 * c * L**3 / pw) ** (1 / 3)
    T_hi = T_free * rng.uniform(0.3, 1.5)
    p = kn.ConvexProgram()
    x = p.variable("x", (2,))
    T = p.variable("T", (), lb=1e-3, init=min(1.0, T_hi / 2))
    p.minimize(kn.cubic_over_quad([x[[0]] - a0[0], x[[1]] - a0[1]], T.all, c), T.all * pw)
    p.affine_eq(x.all, a0 + d)
    p.affine_leq(T.all, T_hi)
    Ts = min(T_free, T_hi)
    opt = c * L**3 / Ts**2 + pw * Ts

    def viol(v):
        return max(float(np.max(np.abs(v["x"] - a0 - d))), float(v["T"] - T_hi), 1e-3 - float(v["T"]))

    return p, opt, viol


def disk_case(rng):
    """Push as far as possible in one direction inside a disk cut by a half-plane."""
    cc = rng.uniform(-10, 10, 2)
    r = rng.uniform(1, 20)
    h = rng.uniform(-0.9, 0.9) * r
    p = kn.ConvexProgram()
    x = p.variable("x", (2,), init=cc + [0, max(h, 0) + 0.05 * r])
    p.minimize(x[[0]] * -1.0)
    p.norm_leq([x[[0]] - cc[0], x[[1]] - cc[1]], kn.Affine.constant([r]))
    p.affine_leq(-x[[1]], -(cc[1] + h))
    opt = -(cc[0] + math.sqrt(r * r - max(h, 0.0) ** 2))

    def viol(v):
        xx = v["x"]
        return max(float(np.linalg.norm(xx - cc) - r), float(cc[1] + h - xx[1]))

    return p, opt, viol


FAMILIES = [hover_case, segment_case, allocation_case, weber_case, rate_case, cubic_case, disk_case]


def suite(n=100, seed=2024):
    """``n`` (name, builder output) pairs cycling through the families."""
    rng = np.random.default_rng(seed)
    for i in range(n):
        fam = FAMILIES[i % len(FAMILIES)]
        yield fam.__name__, fam(rng)
