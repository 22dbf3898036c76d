"""4-metrics from integrable pairs and their curvature certification.

The frame read off a Lax pair on coordinates (x, y, w1, w2),

    X_00' = phi0,  X_01' = phi1,  X_10' = dx + alpha0,  X_11' = dy + alpha1,

determines the conformal metric through the dual coframe:

    g = theta^00' . theta^11' - theta^01' . theta^10',

with "." the symmetric product without a 1/2 (so that the null-Kaehler
family reproduces g = f(dz dy - (dt - az dx - c dy) dx) on the nose).
The metric has split signature (2,2).  Curvature runs entirely on jets:
metric jets of order 2 give Christoffels of order 1 and pointwise
Riemann/Ricci/Weyl values; the Weyl tensor is split into selfdual and
antiselfdual halves by the Hodge star acting on its second index pair.

The orientation sign ORIENTATION_SIGMA fixes which half is which: it is
calibrated once so that the antiselfdual half is the one that vanishes
on the (curved, non-conformally-flat) null-Kaehler family, and pinned by
a test.
"""
from __future__ import annotations

import itertools

import numpy as np

from .expr import Expression, evaluate, parse
from .jets import Jet, JetSpace
from .pairs import ProjectivePair, build_lax, lax_residual

# Which Weyl half the construction kills; calibrated on the null-Kaehler
# family (see tests), stored once, never branched on.
ORIENTATION_SIGMA = 1.0

_EPS4 = np.zeros((4, 4, 4, 4))
for _perm in itertools.permutations(range(4)):
    _sign = 1.0
    _p = list(_perm)
    for _i in range(4):
        for _j in range(_i + 1, 4):
            if _p[_i] > _p[_j]:
                _sign = -_sign
    _EPS4[_perm] = _sign


def _as_expression(value, allowed):
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        return parse(value, allowed)
    return Expression.const(float(value))


# -- jet linear algebra -------------------------------------------------------


def jet_gauss_solve(A, B):
    """Solve A X = B for matrices of jets by Gaussian elimination with
    pivoting on the magnitude of constant terms.  A is n x n, B is n x m
    (lists of lists of Jets); returns X as a list of lists of Jets."""
    n = len(A)
    m = len(B[0])
    A = [row[:] for row in A]
    B = [row[:] for row in B]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r][col].value))
        if abs(A[piv][col].value) == 0.0:
            raise np.linalg.LinAlgError("singular jet matrix")
        A[col], A[piv] = A[piv], A[col]
        B[col], B[piv] = B[piv], B[col]
        inv = A[col][col].reciprocal()
        A[col] = [a * inv for a in A[col]]
        B[col] = [b * inv for b in B[col]]
        for r in range(n):
            if r == col:
                continue
            f = A[r][col]
            if np.all(f.coeffs == 0.0):
                continue
            A[r] = [a - f * p for a, p in zip(A[r], A[col])]
            B[r] = [b - f * p for b, p in zip(B[r], B[col])]
    return B


def jet_matrix_inverse(A):
    n = len(A)
    space = A[0][0].space
    eye = [[space.constant(1.0 if i == j else 0.0) for j in range(n)]
           for i in range(n)]
    return jet_gauss_solve(A, eye)


# -- metric assembly ----------------------------------------------------------


def frame_from_pair(pair: ProjectivePair):
    """The four frame fields as component Expressions in coords order
    (x, y, w1, w2): [phi0, phi1, dx + alpha0, dy + alpha1]."""
    if len(pair.fiber) != 2:
        raise ValueError("a 4-metric needs a 2-dimensional fiber")
    zero = Expression.const(0.0)
    one = Expression.const(1.0)
    f = pair.fiber
    frame = [
        [zero, zero, pair.phi[0][0], pair.phi[0][1]],
        [zero, zero, pair.phi[1][0], pair.phi[1][1]],
        [one, zero, pair.alpha[0][0], pair.alpha[0][1]],
        [zero, one, pair.alpha[1][0], pair.alpha[1][1]],
    ]
    return frame


class MetricBuilder:
    """Produces order-k jets of the 4x4 metric at sample points.

    Construct either from a pair (frame route, optionally scaled by a
    conformal factor) or from explicit component Expressions."""

    def __init__(self, pair=None, factor=None, components=None, coords=None,
                 orientation=1.0):
        if pair is not None:
            self.coords = pair.coords
            self.frame = frame_from_pair(pair)
            self.components = None
        elif components is not None:
            if coords is None:
                raise ValueError("explicit components need coords")
            self.coords = tuple(coords)
            self.frame = None
            self.components = [[_as_expression(components[i][j], self.coords)
                                for j in range(4)] for i in range(4)]
        else:
            raise ValueError("need a pair or explicit components")
        self.factor = (_as_expression(factor, self.coords)
                       if factor is not None else None)
        self.orient = float(orientation)

    def jets(self, point, order=2):
        """4x4 symmetric matrix of metric jets at a point dict."""
        space = JetSpace(self.coords, order)
        env = space.seed(dict(point))
        if self.components is not None:
            g = [[evaluate(self.components[i][j], env, space=space)
                  for j in range(4)] for i in range(4)]
        else:
            M = [[evaluate(c, env, space=space) for c in vec]
                 for vec in self.frame]
            Minv = jet_matrix_inverse(M)
            # coframe rows are columns of M^{-1}
            th = [[Minv[i][a] for i in range(4)] for a in range(4)]
            g = [[th[0][i] * th[3][j] + th[0][j] * th[3][i]
                  - th[1][i] * th[2][j] - th[1][j] * th[2][i]
                  for j in range(4)] for i in range(4)]
        if self.factor is not None:
            f = evaluate(self.factor, env, space=space)
            g = [[gij * f for gij in row] for row in g]
        return g

    def orientation(self, point):
        """Sign of the frame volume form against the coordinate one; the
        Hodge star must be taken in the frame orientation."""
        if self.frame is None:
            return self.orient
        return float(np.sign(np.linalg.det(frame_values(self, point))))


def frame_values(builder: MetricBuilder, point):
    if builder.frame is None:
        raise ValueError("no frame on an explicit-component metric")
    space = JetSpace(builder.coords, 0)
    env = space.seed(dict(point))
    return np.array([[evaluate(c, env, space=space).value for c in vec]
                     for vec in builder.frame])


# -- curvature pipeline -------------------------------------------------------


def christoffel_jets_4d(g, coords):
    """Order-1 jets of the Levi-Civita Christoffels from order-2 metric jets."""
    ginv = jet_matrix_inverse(g)
    ginv1 = [[x.truncate(1) for x in row] for row in ginv]
    dg = [[[g[i][j].derivative(c) for c in coords] for j in range(4)]
          for i in range(4)]
    gam = [[[None] * 4 for _ in range(4)] for _ in range(4)]
    for a in range(4):
        for b in range(4):
            for c in range(b, 4):
                acc = None
                for d in range(4):
                    term = ginv1[a][d] * (dg[d][c][b] + dg[b][d][c]
                                          - dg[b][c][d])
                    acc = term if acc is None else acc + term
                val = acc * 0.5
                gam[a][b][c] = val
                gam[a][c][b] = val
    return gam, ginv


def riemann_values(g, coords):
    """Pointwise Riemann tensor (first index up) from order-2 metric jets,
    plus metric value matrices."""
    gam, ginv = christoffel_jets_4d(g, coords)
    gv = np.array([[g[i][j].value for j in range(4)] for i in range(4)])
    giv = np.array([[ginv[i][j].value for j in range(4)] for i in range(4)])
    gamv = np.array([[[gam[a][b][c].value for c in range(4)]
                      for b in range(4)] for a in range(4)])
    dgam = np.array([[[[gam[a][b][c].gradient()[d] for d in range(4)]
                       for c in range(4)] for b in range(4)]
                     for a in range(4)])
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    R = (np.einsum("adbc->abcd", dgam) - np.einsum("acbd->abcd", dgam)
         + np.einsum("ace,edb->abcd", gamv, gamv)
         - np.einsum("ade,ecb->abcd", gamv, gamv))
    return R, gv, giv, gamv


def hodge_star_operator(gv, giv, orientation=1.0):
    """The star on 2-forms: (*F)_ab = 1/2 eps_ab^{cd} F_cd with
    eps_abcd = sigma * orientation * sqrt|det g| [abcd], where
    `orientation` is the sign of the frame volume form in the chart."""
    det = np.linalg.det(gv)
    eps = ORIENTATION_SIGMA * orientation * np.sqrt(abs(det)) * _EPS4
    return 0.5 * np.einsum("abmn,mc,nd->abcd", eps, giv, giv)


def curvature_report(g, coords, orientation=1.0):
    """All curvature norms from order-2 metric jets at one point.

    Returns a dict with max-abs component norms of: Riemann (all down),
    Ricci, trace-free Ricci, scalar, Weyl+ and Weyl- (first index up, the
    conformally invariant arrangement), plus the star idempotency defect
    and the signature of the metric value."""
    Rup, gv, giv, _ = riemann_values(g, coords)
    Rdown = np.einsum("ae,ebcd->abcd", gv, Rup)
    ric = np.einsum("abad->bd", Rup)
    scal = float(np.einsum("bd,bd->", giv, ric))
    ric_tf = ric - 0.25 * scal * gv
    # Schouten and the Kulkarni-Nomizu split of Riemann
    P = 0.5 * (ric - (scal / 6.0) * gv)
    kn = (np.einsum("ac,bd->abcd", gv, P) + np.einsum("bd,ac->abcd", gv, P)
          - np.einsum("ad,bc->abcd", gv, P) - np.einsum("bc,ad->abcd", gv, P))
    weyl = Rdown - kn
    star = hodge_star_operator(gv, giv, orientation)
    # ** = id on 2-forms in split signature; measure the defect against
    # the antisymmetrized identity
    star_sq = np.einsum("abmn,mncd->abcd", star, star)
    star_defect = float(np.abs(star_sq - _antisym_identity()).max())
    weyl_star = np.einsum("cdef,abef->abcd", star, weyl)
    wplus = 0.5 * (weyl + weyl_star)
    wminus = 0.5 * (weyl - weyl_star)
    wplus_up = np.einsum("ae,ebcd->abcd", giv, wplus)
    wminus_up = np.einsum("ae,ebcd->abcd", giv, wminus)
    eigs = np.linalg.eigvalsh(gv)
    return {
        "riemann": float(np.abs(Rdown).max()),
        "ricci": float(np.abs(ric).max()),
        "ricci_tracefree": float(np.abs(ric_tf).max()),
        "scalar": abs(scal),
        "weyl_plus": float(np.abs(wplus_up).max()),
        "weyl_minus": float(np.abs(wminus_up).max()),
        "star_defect": star_defect,
        "signature_ok": bool((eigs > 0).sum() == 2 and (eigs < 0).sum() == 2),
        "det": float(np.linalg.det(gv)),
    }


def _antisym_identity():
    eye = np.eye(4)
    return 0.5 * (np.einsum("ac,bd->abcd", eye, eye)
                  - np.einsum("ad,bc->abcd", eye, eye))


def certify_selfdual(P, pair: ProjectivePair, points, tol=1e-8,
                     factor=None, lax_tol=1e-10):
    """The core gate: check Lax integrability, then the vanishing of the
    antiselfdual Weyl half at every sample point."""
    lax = build_lax(P, pair)
    lres = lax_residual(lax, points)
    builder = MetricBuilder(pair=pair, factor=factor)
    worst = {"weyl_minus": 0.0, "weyl_plus": 0.0, "ricci": 0.0,
             "star_defect": 0.0}
    signature_ok = True
    for pt in points:
        rep = curvature_report(builder.jets(pt, order=2), builder.coords,
                               builder.orientation(pt))
        for k in worst:
            worst[k] = max(worst[k], rep[k])
        signature_ok = signature_ok and rep["signature_ok"]
    return {
        "lax_residual": lres["residual"],
        "lax_cubic_max": lres["cubic_max"],
        "weyl_minus": worst["weyl_minus"],
        "weyl_plus": worst["weyl_plus"],
        "ricci": worst["ricci"],
        "star_defect": worst["star_defect"],
        "signature_ok": signature_ok,
        "pass": (lres["residual"] < lax_tol and worst["weyl_minus"] < tol
                 and signature_ok),
    }


# -- Killing / twist / distributions ------------------------------------------


def killing_report(builder: MetricBuilder, K, points):
    """Residuals for a vector field K: exact and conformal Killing defect,
    nullness g(K,K), twist density, and the defect of K-geodesy.

    The twist is the permutation-symbol dual of alpha ^ d alpha with
    alpha = g(K, .), contracted back onto K with the Euclidean inner
    product (a density: only vanishing and point-to-point proportionality
    are meaningful).  The geodesic residual is the part of D_K K not
    proportional to K, measured with the Euclidean inner product since K
    is typically null.
    """
    coords = builder.coords
    K = [_as_expression(c, coords) for c in K]
    out = {"exact_killing": 0.0, "conformal_killing": 0.0, "null_defect": 0.0,
           "twist": [], "geodesic": 0.0}
    for pt in points:
        g = builder.jets(pt, order=2)
        space = JetSpace(coords, 2)
        env = space.seed(dict(pt))
        Kj = [evaluate(c, env, space=space) for c in K]
        gv = np.array([[g[i][j].value for j in range(4)] for i in range(4)])
        giv = np.linalg.inv(gv)
        Kv = np.array([k.value for k in Kj])
        dK = np.array([k.gradient() for k in Kj])  # dK[a][b] = d_b K^a
        dg = np.array([[g[i][j].gradient() for j in range(4)]
                       for i in range(4)])
        lie = (np.einsum("c,abc->ab", Kv, dg)
               + np.einsum("cb,ca->ab", gv, dK)
               + np.einsum("ac,cb->ab", gv, dK))
        out["exact_killing"] = max(out["exact_killing"],
                                   float(np.abs(lie).max()))
        trace = float(np.einsum("ab,ab->", giv, lie))
        conf = lie - 0.25 * trace * gv
        out["conformal_killing"] = max(out["conformal_killing"],
                                       float(np.abs(conf).max()))
        out["null_defect"] = max(out["null_defect"],
                                 abs(float(Kv @ gv @ Kv)))
        # twist: alpha = g(K, .) as order-1 jets
        alpha = [None] * 4
        for a_ in range(4):
            acc = None
            for b_ in range(4):
                term = g[a_][b_].truncate(1) * Kj[b_].truncate(1)
                acc = term if acc is None else acc + term
            alpha[a_] = acc
        av = np.array([a_.value for a_ in alpha])
        da = np.array([a_.gradient() for a_ in alpha])  # da[a][b] = d_b alpha_a
        curl = da.T - da  # (d alpha)_bc = d_b alpha_c - d_c alpha_b
        T = (np.einsum("a,bc->abc", av, curl)
             + np.einsum("b,ca->abc", av, curl)
             + np.einsum("c,ab->abc", av, curl))
        w = np.einsum("dabc,abc->d", _EPS4, T) / 6.0
        out["twist"].append(float(w @ Kv) / float(Kv @ Kv))
        # geodesic residual
        gam, _ = christoffel_jets_4d(g, coords)
        gamv = np.array([[[gam[a_][b_][c_].value for c_ in range(4)]
                          for b_ in range(4)] for a_ in range(4)])
        acc = np.einsum("b,ab->a", Kv, dK) + np.einsum("abc,b,c->a",
                                                       gamv, Kv, Kv)
        perp = acc - (acc @ Kv) / (Kv @ Kv) * Kv
        out["geodesic"] = max(out["geodesic"], float(np.abs(perp).max()))
    out["twist_max"] = max(abs(t) for t in out["twist"])
    return out


def frobenius_residual(fields, coords, points):
    """Max over field pairs and points of the component of [V_i, V_j]
    outside span{fields} (least squares)."""
    coords = tuple(coords)
    fields = [[_as_expression(c, coords) for c in f] for f in fields]
    space = JetSpace(coords, 1)
    n = len(coords)
    worst = 0.0
    for pt in points:
        env = space.seed(dict(pt))
        jets = [[evaluate(c, env, space=space) for c in f] for f in fields]
        vals = np.array([[c.value for c in f] for f in jets])
        grads = np.array([[c.gradient() for c in f] for f in jets])
        if np.linalg.matrix_rank(vals) < len(fields):
            raise ValueError("dependent fields at sample point")
        for i in range(len(fields)):
            for j in range(i + 1, len(fields)):
                br = grads[j] @ vals[i] - grads[i] @ vals[j]
                coef, *_ = np.linalg.lstsq(vals.T, br, rcond=None)
                perp = br - vals.T @ coef
                worst = max(worst, float(np.abs(perp).max()))
    return worst


# -- null-Kaehler family ------------------------------------------------------


def build_null_kahler(a, c, f):
    """The two-function family: pair with L0 = dz + lam dt,
    L1 = dx + a z dt + lam (dy + c dt) + a dlam over the spray with
    a0 = a(x, y), conformal factor f(x, z).

    Returns the surface, the pair, the metric builder, the endomorphism
    J = dz (x) dt + dx (x) dy and the 2-form w = f dx ^ dz, plus a
    checker for the structure identities."""
    from .projective import ProjectiveSurface

    a = _as_expression(a, ("x", "y"))
    c = _as_expression(c, ("x", "y"))
    coords = ("x", "y", "t", "z")
    f = _as_expression(f, coords)
    P = ProjectiveSurface({(1, 0, 0): a})
    z = Expression.var("z")
    pair = ProjectivePair(("t", "z"),
                          alpha0=[a * z, 0.0], alpha1=[c, 0.0],
                          phi0=[0.0, 1.0], phi1=[1.0, 0.0])
    builder = MetricBuilder(pair=pair, factor=f)
    # J sends d_z to d_t and d_x to d_y + c d_t; the c-term is what makes
    # g(J., .) skew when c is nonzero (it drops out for c = 0).  Stored as
    # J^a_b with a the component index, coords (x, y, t, z).
    zero = Expression.const(0.0)
    one = Expression.const(1.0)
    J_expr = [[zero] * 4 for _ in range(4)]
    J_expr[2][3] = one
    J_expr[1][0] = one
    J_expr[2][0] = c
    omega = [[zero] * 4 for _ in range(4)]
    omega[0][3] = f
    omega[3][0] = -f

    def check(points):
        rep = {"domega": 0.0, "compat": 0.0, "J_null": 0.0,
               "g_JJ": 0.0, "killing": 0.0, "omega_antiselfdual": 0.0}
        space = JetSpace(coords, 1)
        for pt in points:
            env = space.seed(dict(pt))
            J = np.array([[evaluate(J_expr[i][j], env, space=space).value
                           for j in range(4)] for i in range(4)])
            rep["J_null"] = max(rep["J_null"], float(np.abs(J @ J).max()))
            om = [[evaluate(omega[i][j], env, space=space) for j in range(4)]
                  for i in range(4)]
            omv = np.array([[om[i][j].value for j in range(4)]
                            for i in range(4)])
            dom = np.array([[om[i][j].gradient() for j in range(4)]
                            for i in range(4)])
            for i in range(4):
                for j in range(4):
                    for k in range(4):
                        d3 = dom[j][k][i] + dom[k][i][j] + dom[i][j][k]
                        rep["domega"] = max(rep["domega"], abs(d3))
            g = builder.jets(pt, order=2)
            gv = np.array([[g[i][j].value for j in range(4)]
                           for i in range(4)])
            giv = np.linalg.inv(gv)
            # omega(U, V) = g(JU, V):  omega_ab = J^c_a g_cb
            compat = np.einsum("ca,cb->ab", J, gv) - omv
            rep["compat"] = max(rep["compat"], float(np.abs(compat).max()))
            gjj = np.einsum("ca,db,cd->ab", J, J, gv)
            rep["g_JJ"] = max(rep["g_JJ"], float(np.abs(gjj).max()))
            dg_t = np.array([[g[i][j].gradient()[2] for j in range(4)]
                             for i in range(4)])
            rep["killing"] = max(rep["killing"], float(np.abs(dg_t).max()))
            star = hodge_star_operator(gv, giv, builder.orientation(pt))
            starom = np.einsum("abcd,cd->ab", star, omv)
            rep["omega_antiselfdual"] = max(rep["omega_antiselfdual"],
                                            float(np.abs(starom + omv).max()))
        return rep

    return {"surface": P, "pair": pair, "metric": builder, "J": J_expr,
            "omega": omega, "check": check}
