"""Pure-Python (numpy) jet kernels.

Same signatures and status codes as the compiled ``_kernel`` module; the
program is executed instruction by instruction, vectorized over points.
"""

import numpy as np

from .program import (
    ERR_DIV_ZERO,
    ERR_LN_DOMAIN,
    ERR_POW_ZERO,
    ERR_SQRT_DOMAIN,
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_EXP,
    OP_LN,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_VAR,
)

BACKEND = "python"

GEO_COMPLETE = 0
GEO_LEFT_DOMAIN = 1
GEO_EXPR_ERROR = 2
GEO_DEGENERATE = 3


def _pairs(n):
    pk, pl = np.triu_indices(n)
    return pk.astype(np.int32), pl.astype(np.int32)


def eval_program(ops, arg_a, arg_b, consts, outputs, points, order=2):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    P, n = pts.shape
    pk, pl = _pairs(n)
    nh = len(pk)
    K = len(outputs)
    val = np.zeros((P, K))
    grad = np.zeros((P, K, n))
    hess = np.zeros((P, K, nh))
    flags = np.zeros(P, dtype=np.uint8)
    rv, rg, rh = [], [], []
    zero_g = np.zeros((P, n))
    zero_h = np.zeros((P, nh))

    def fail(code, r, bad):
        return val, grad, hess, flags, code, r, int(np.flatnonzero(bad)[0])

    for r in range(len(ops)):
        op = int(ops[r])
        a = int(arg_a[r])
        b = int(arg_b[r])
        if op == OP_CONST:
            rv.append(np.full(P, float(consts[r])))
            rg.append(zero_g)
            rh.append(zero_h)
            continue
        if op == OP_VAR:
            rv.append(pts[:, a].copy())
            g = np.zeros((P, n))
            g[:, a] = 1.0
            rg.append(g)
            rh.append(zero_h)
            continue
        va, ga, ha = rv[a], rg[a], rh[a]
        if op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV):
            vb, gb, hb = rv[b], rg[b], rh[b]
            if op == OP_ADD:
                v, g, h = va + vb, ga + gb, ha + hb
            elif op == OP_SUB:
                v, g, h = va - vb, ga - gb, ha - hb
            elif op == OP_MUL:
                v = va * vb
                g = va[:, None] * gb + vb[:, None] * ga
                h = (
                    va[:, None] * hb
                    + vb[:, None] * ha
                    + ga[:, pk] * gb[:, pl]
                    + ga[:, pl] * gb[:, pk]
                )
            else:
                bad = vb == 0.0
                if bad.any():
                    return fail(ERR_DIV_ZERO, r, bad)
                v = va / vb
                g = (ga - v[:, None] * gb) / vb[:, None]
                h = (
                    ha - v[:, None] * hb - g[:, pk] * gb[:, pl] - gb[:, pk] * g[:, pl]
                ) / vb[:, None]
            rv.append(v)
            rg.append(g)
            rh.append(h)
            continue

        u = va
        if op == OP_NEG:
            v, f1, f2 = -u, -np.ones(P), np.zeros(P)
        elif op == OP_POW:
            e = b
            if e == 0:
                v, f1, f2 = np.ones(P), np.zeros(P), np.zeros(P)
            else:
                bad = (u == 0.0) & (e < 0)
                if bad.any():
                    return fail(ERR_POW_ZERO, r, bad)
                v = np.power(u, float(e))
                f1 = e * np.power(u, float(e - 1))
                f2 = np.zeros(P) if e == 1 else e * (e - 1) * np.power(u, float(e - 2))
        elif op == OP_SIN:
            v = np.sin(u)
            f1, f2 = np.cos(u), -v
        elif op == OP_COS:
            v = np.cos(u)
            f1, f2 = -np.sin(u), -v
        elif op == OP_EXP:
            v = np.exp(u)
            f1 = f2 = v
        elif op == OP_LN:
            bad = u <= 0.0
            if bad.any():
                return fail(ERR_LN_DOMAIN, r, bad)
            v = np.log(u)
            f1 = 1.0 / u
            f2 = -f1 * f1
        elif op == OP_SQRT:
            bad = u <= 0.0
            if bad.any():
                return fail(ERR_SQRT_DOMAIN, r, bad)
            v = np.sqrt(u)
            f1 = 0.5 / v
            f2 = -0.25 / (v * u)
        elif op == OP_ABS:
            v = np.abs(u)
            f1 = np.sign(u)
            f2 = np.zeros(P)
            flags |= (u == 0.0).astype(np.uint8)
        else:
            raise ValueError(f"unknown opcode {op}")
        rv.append(v)
        if order >= 1:
            rg.append(f1[:, None] * ga)
        else:
            rg.append(zero_g)
        if order >= 2:
            rh.append(f1[:, None] * ha + f2[:, None] * ga[:, pk] * ga[:, pl])
        else:
            rh.append(zero_h)

    for j, o in enumerate(outputs):
        val[:, j] = rv[o]
        if order >= 1:
            grad[:, j] = rg[o]
        if order >= 2:
            hess[:, j] = rh[o]
    return val, grad, hess, flags, 0, -1, -1


def _accel(prog, sym_map, x, v):
    ops, arg_a, arg_b, consts, outputs = prog
    val, grad, _, _, status, err_instr, _ = eval_program(
        ops, arg_a, arg_b, consts, outputs, x[None, :], order=1
    )
    if status:
        return None, status, err_instr
    g = val[0][sym_map]
    dg = grad[0][sym_map]  # [i, j, k] = d_k g_ij
    n = len(x)
    # d_i g_jk - 1/2 d_k g_ij contracted with v^i v^j
    rhs = -(
        np.einsum("jki,i,j->k", dg, v, v) - 0.5 * np.einsum("ijk,i,j->k", dg, v, v)
    )
    maxrow = np.max(np.linalg.norm(g, axis=1))
    det = np.linalg.det(g)
    if det == 0.0 or abs(det) < 1e-12 * maxrow**n:
        return None, -1, -1
    return np.linalg.solve(g, rhs), 0, -1


def _inside(x, lo, hi):
    return bool(np.all((x > lo) & (x < hi)))


def rk4_geodesic(ops, arg_a, arg_b, consts, outputs, sym_map, x0, v0, t0, h, nsteps, lo, hi):
    prog = (ops, arg_a, arg_b, consts, outputs)
    sym_map = np.asarray(sym_map)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(x0)
    ts = np.zeros(nsteps + 1)
    xs = np.zeros((nsteps + 1, n))
    vs = np.zeros((nsteps + 1, n))
    xs[0] = x0
    vs[0] = v0
    ts[0] = t0
    count, status, err_instr = 1, GEO_COMPLETE, -1
    err_code = 0

    def stage(x, v):
        nonlocal err_code
        acc, st, ei = _accel(prog, sym_map, x, v)
        if st:
            err_code = st
            return None, (GEO_DEGENERATE if st < 0 else GEO_EXPR_ERROR), ei
        return acc, 0, -1

    for s in range(nsteps):
        xc, vc = xs[s], vs[s]
        k1, st, err_instr = stage(xc, vc)
        if st:
            status = st
            break
        x2, v2 = xc + 0.5 * h * vc, vc + 0.5 * h * k1
        if not _inside(x2, lo, hi):
            status = GEO_LEFT_DOMAIN
            break
        k2, st, err_instr = stage(x2, v2)
        if st:
            status = st
            break
        x3, v3 = xc + 0.5 * h * v2, vc + 0.5 * h * k2
        if not _inside(x3, lo, hi):
            status = GEO_LEFT_DOMAIN
            break
        k3, st, err_instr = stage(x3, v3)
        if st:
            status = st
            break
        x4, v4 = xc + h * v3, vc + h * k3
        if not _inside(x4, lo, hi):
            status = GEO_LEFT_DOMAIN
            break
        k4, st, err_instr = stage(x4, v4)
        if st:
            status = st
            break
        xs[s + 1] = xc + h / 6.0 * (vc + 2.0 * v2 + 2.0 * v3 + v4)
        vs[s + 1] = vc + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not _inside(xs[s + 1], lo, hi):
            status = GEO_LEFT_DOMAIN
            break
        ts[s + 1] = t0 + (s + 1) * h
        count = s + 2
    return ts, xs, vs, count, status, err_instr, err_code
