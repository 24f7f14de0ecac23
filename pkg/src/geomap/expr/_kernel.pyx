# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled jet kernels.

Mirrors ``_kernel_py`` exactly in signature and status codes.  Hessians are
packed upper triangles, pair ``q`` <-> ``(pk[q], pl[q])`` with ``k <= l``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, log, sqrt, pow, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_NEG = 2
    OP_ADD = 3
    OP_SUB = 4
    OP_MUL = 5
    OP_DIV = 6
    OP_POW = 7
    OP_SIN = 8
    OP_COS = 9
    OP_EXP = 10
    OP_LN = 11
    OP_SQRT = 12
    OP_ABS = 13
    ERR_DIV_ZERO = 1
    ERR_LN_DOMAIN = 2
    ERR_SQRT_DOMAIN = 3
    ERR_POW_ZERO = 4
    GEO_COMPLETE = 0
    GEO_LEFT_DOMAIN = 1
    GEO_EXPR_ERROR = 2
    GEO_DEGENERATE = 3

BACKEND = "cython"


cdef int run_point(int m, const int* ops, const int* aa, const int* bb,
                   const double* cs, int n, int nh, const int* pk, const int* pl,
                   const double* x, int order,
                   double* rv, double* rg, double* rh,
                   int* err_instr, int* flag) noexcept nogil:
    cdef int r, k, q, a, b, e, op
    cdef double u, f1, f2, s, va, vb, qv
    cdef double* ga
    cdef double* gb
    cdef double* gr
    cdef double* ha
    cdef double* hb
    cdef double* hr
    for r in range(m):
        a = aa[r]
        b = bb[r]
        gr = rg + r * n
        hr = rh + r * nh
        op = ops[r]
        if op == OP_CONST or op == OP_VAR:
            if op == OP_CONST:
                rv[r] = cs[r]
            else:
                rv[r] = x[a]
            if order >= 1:
                for k in range(n):
                    gr[k] = 0.0
                if op == OP_VAR:
                    gr[a] = 1.0
            if order >= 2:
                for q in range(nh):
                    hr[q] = 0.0
            continue
        ga = rg + a * n
        ha = rh + a * nh
        if op == OP_ADD or op == OP_SUB or op == OP_MUL or op == OP_DIV:
            gb = rg + b * n
            hb = rh + b * nh
            va = rv[a]
            vb = rv[b]
            if op == OP_ADD:
                rv[r] = va + vb
                if order >= 1:
                    for k in range(n):
                        gr[k] = ga[k] + gb[k]
                if order >= 2:
                    for q in range(nh):
                        hr[q] = ha[q] + hb[q]
            elif op == OP_SUB:
                rv[r] = va - vb
                if order >= 1:
                    for k in range(n):
                        gr[k] = ga[k] - gb[k]
                if order >= 2:
                    for q in range(nh):
                        hr[q] = ha[q] - hb[q]
            elif op == OP_MUL:
                rv[r] = va * vb
                if order >= 1:
                    for k in range(n):
                        gr[k] = va * gb[k] + vb * ga[k]
                if order >= 2:
                    for q in range(nh):
                        hr[q] = (va * hb[q] + vb * ha[q]
                                 + ga[pk[q]] * gb[pl[q]] + ga[pl[q]] * gb[pk[q]])
            else:
                if vb == 0.0:
                    err_instr[0] = r
                    return ERR_DIV_ZERO
                qv = va / vb
                rv[r] = qv
                if order >= 1:
                    for k in range(n):
                        gr[k] = (ga[k] - qv * gb[k]) / vb
                if order >= 2:
                    for q in range(nh):
                        hr[q] = (ha[q] - qv * hb[q]
                                 - gr[pk[q]] * gb[pl[q]] - gb[pk[q]] * gr[pl[q]]) / vb
            continue
        u = rv[a]
        if op == OP_NEG:
            rv[r] = -u
            f1 = -1.0
            f2 = 0.0
        elif op == OP_POW:
            e = b
            if e == 0:
                rv[r] = 1.0
                f1 = 0.0
                f2 = 0.0
            else:
                if u == 0.0 and e < 0:
                    err_instr[0] = r
                    return ERR_POW_ZERO
                rv[r] = pow(u, <double>e)
                f1 = e * pow(u, <double>(e - 1))
                if e == 1:
                    f2 = 0.0
                else:
                    f2 = e * (e - 1) * pow(u, <double>(e - 2))
        elif op == OP_SIN:
            s = sin(u)
            rv[r] = s
            f1 = cos(u)
            f2 = -s
        elif op == OP_COS:
            s = cos(u)
            rv[r] = s
            f1 = -sin(u)
            f2 = -s
        elif op == OP_EXP:
            s = exp(u)
            rv[r] = s
            f1 = s
            f2 = s
        elif op == OP_LN:
            if u <= 0.0:
                err_instr[0] = r
                return ERR_LN_DOMAIN
            rv[r] = log(u)
            f1 = 1.0 / u
            f2 = -f1 * f1
        elif op == OP_SQRT:
            if u <= 0.0:
                err_instr[0] = r
                return ERR_SQRT_DOMAIN
            s = sqrt(u)
            rv[r] = s
            f1 = 0.5 / s
            f2 = -0.25 / (s * u)
        else:  # OP_ABS
            rv[r] = fabs(u)
            f2 = 0.0
            if u > 0.0:
                f1 = 1.0
            elif u < 0.0:
                f1 = -1.0
            else:
                f1 = 0.0
                flag[0] = 1
        if order >= 1:
            for k in range(n):
                gr[k] = f1 * ga[k]
        if order >= 2:
            for q in range(nh):
                hr[q] = f1 * ha[q] + f2 * ga[pk[q]] * ga[pl[q]]
    return 0


def _pairs(int n):
    pk = np.empty(n * (n + 1) // 2, dtype=np.int32)
    pl = np.empty(n * (n + 1) // 2, dtype=np.int32)
    q = 0
    for k in range(n):
        for l in range(k, n):
            pk[q] = k
            pl[q] = l
            q += 1
    return pk, pl


def eval_program(const int[::1] ops, const int[::1] arg_a, const int[::1] arg_b,
                 const double[::1] consts, const int[::1] outputs,
                 points, int order=2):
    """Evaluate the program's outputs and their jets at each row of ``points``.

    Returns ``(val, grad, hess, flags, status, err_instr, err_point)``.
    """
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef int P = pts.shape[0]
    cdef int n = pts.shape[1]
    cdef int nh = n * (n + 1) // 2
    cdef int m = ops.shape[0]
    cdef int K = outputs.shape[0]
    pk_arr, pl_arr = _pairs(n)
    cdef int[::1] pk = pk_arr
    cdef int[::1] pl = pl_arr
    val_arr = np.zeros((P, K))
    grad_arr = np.zeros((P, K, n))
    hess_arr = np.zeros((P, K, nh))
    flags_arr = np.zeros(P, dtype=np.uint8)
    cdef double[:, ::1] val = val_arr
    cdef double[:, :, ::1] grad = grad_arr
    cdef double[:, :, ::1] hess = hess_arr
    cdef unsigned char[::1] flags = flags_arr
    rv_arr = np.empty(max(m, 1))
    rg_arr = np.empty(max(m * n, 1))
    rh_arr = np.empty(max(m * nh, 1))
    cdef double[::1] rv = rv_arr
    cdef double[::1] rg = rg_arr
    cdef double[::1] rh = rh_arr
    cdef int p, j, k, q, o, status = 0, err_instr = -1, err_point = -1, flag
    with nogil:
        for p in range(P):
            flag = 0
            status = run_point(m, &ops[0], &arg_a[0], &arg_b[0], &consts[0], n, nh,
                               &pk[0], &pl[0], &pts[p, 0], order,
                               &rv[0], &rg[0], &rh[0], &err_instr, &flag)
            if status != 0:
                err_point = p
                break
            flags[p] = flag
            for j in range(K):
                o = outputs[j]
                val[p, j] = rv[o]
                if order >= 1:
                    for k in range(n):
                        grad[p, j, k] = rg[o * n + k]
                if order >= 2:
                    for q in range(nh):
                        hess[p, j, q] = rh[o * nh + q]
    return val_arr, grad_arr, hess_arr, flags_arr, status, err_instr, err_point


cdef int accel(int m, const int* ops, const int* aa, const int* bb, const double* cs,
               const int* outputs, const int* sym, int n, int nh,
               const int* pk, const int* pl, const double* x, const double* v,
               double* rv, double* rg, double* rh, double* mat, double* rhs,
               double* out, int* err_instr) noexcept nogil:
    """Geodesic acceleration -Gamma^h_ij v^i v^j; 0, expression code, or -1 if degenerate."""
    cdef int flag = 0, status, i, j, k, c, piv, o
    cdef double s, t, big, rownorm, maxrow = 0.0, det = 1.0, floor
    status = run_point(m, ops, aa, bb, cs, n, nh, pk, pl, x, 1, rv, rg, rh, err_instr, &flag)
    if status != 0:
        return status
    for i in range(n):
        rownorm = 0.0
        for j in range(n):
            o = outputs[sym[i * n + j]]
            mat[i * n + j] = rv[o]
            rownorm += rv[o] * rv[o]
        rownorm = sqrt(rownorm)
        if rownorm > maxrow:
            maxrow = rownorm
    for k in range(n):
        s = 0.0
        for i in range(n):
            for j in range(n):
                # d_i g_jk - 1/2 d_k g_ij
                s += (rg[outputs[sym[j * n + k]] * n + i]
                      - 0.5 * rg[outputs[sym[i * n + j]] * n + k]) * v[i] * v[j]
        rhs[k] = -s
    # Gaussian elimination with partial pivoting
    for c in range(n):
        piv = c
        big = fabs(mat[c * n + c])
        for i in range(c + 1, n):
            if fabs(mat[i * n + c]) > big:
                big = fabs(mat[i * n + c])
                piv = i
        if big == 0.0:
            return -1
        if piv != c:
            for j in range(n):
                t = mat[c * n + j]
                mat[c * n + j] = mat[piv * n + j]
                mat[piv * n + j] = t
            t = rhs[c]
            rhs[c] = rhs[piv]
            rhs[piv] = t
            det = -det
        det *= mat[c * n + c]
        for i in range(c + 1, n):
            t = mat[i * n + c] / mat[c * n + c]
            for j in range(c, n):
                mat[i * n + j] -= t * mat[c * n + j]
            rhs[i] -= t * rhs[c]
    floor = 1e-12 * pow(maxrow, <double>n)
    if fabs(det) < floor:
        return -1
    for i in range(n - 1, -1, -1):
        s = rhs[i]
        for j in range(i + 1, n):
            s -= mat[i * n + j] * out[j]
        out[i] = s / mat[i * n + i]
    return 0


cdef inline bint inside(int n, const double* x, const double* lo, const double* hi) noexcept nogil:
    cdef int i
    for i in range(n):
        if not (x[i] > lo[i] and x[i] < hi[i]):
            return False
    return True


def rk4_geodesic(const int[::1] ops, const int[::1] arg_a, const int[::1] arg_b,
                 const double[::1] consts, const int[::1] outputs, const int[:, ::1] sym_map,
                 x0, v0, double t0, double h, int nsteps, lo, hi):
    """Fixed-step classical RK4 for x'' = -Gamma(x)(x', x').

    Returns ``(ts, xs, vs, count, status, err_instr, err_code)``; ``count``
    states are valid and ``err_code`` is the expression status on failure.
    """
    cdef int n = sym_map.shape[0]
    cdef int nh = n * (n + 1) // 2
    cdef int m = ops.shape[0]
    pk_arr, pl_arr = _pairs(n)
    cdef int[::1] pk = pk_arr
    cdef int[::1] pl = pl_arr
    cdef double[::1] lo_v = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] hi_v = np.ascontiguousarray(hi, dtype=np.float64)
    ts_arr = np.zeros(nsteps + 1)
    xs_arr = np.zeros((nsteps + 1, n))
    vs_arr = np.zeros((nsteps + 1, n))
    cdef double[::1] ts = ts_arr
    cdef double[:, ::1] xs = xs_arr
    cdef double[:, ::1] vs = vs_arr
    xs_arr[0] = x0
    vs_arr[0] = v0
    ts[0] = t0
    cdef double* rv = <double*> malloc(max(m, 1) * sizeof(double))
    cdef double* rg = <double*> malloc(max(m * n, 1) * sizeof(double))
    cdef double* rh = <double*> malloc(max(m * nh, 1) * sizeof(double))
    cdef double* mat = <double*> malloc(n * n * sizeof(double))
    cdef double* rhs = <double*> malloc(n * sizeof(double))
    cdef double* work = <double*> malloc(12 * n * sizeof(double))
    cdef double* xc = work
    cdef double* vc = work + n
    cdef double* x2 = work + 2 * n
    cdef double* v2 = work + 3 * n
    cdef double* x3 = work + 4 * n
    cdef double* v3 = work + 5 * n
    cdef double* x4 = work + 6 * n
    cdef double* v4 = work + 7 * n
    cdef double* k1 = work + 8 * n
    cdef double* k2 = work + 9 * n
    cdef double* k3 = work + 10 * n
    cdef double* k4 = work + 11 * n
    cdef int status = 0, err_instr = -1, err_code = 0, count = 1, s, i, st
    cdef const int* symp = &sym_map[0, 0]
    with nogil:
        for s in range(nsteps):
            for i in range(n):
                xc[i] = xs[s, i]
                vc[i] = vs[s, i]
            st = accel(m, &ops[0], &arg_a[0], &arg_b[0], &consts[0], &outputs[0], symp,
                       n, nh, &pk[0], &pl[0], xc, vc, rv, rg, rh, mat, rhs, k1, &err_instr)
            if st != 0:
                status = GEO_DEGENERATE if st < 0 else GEO_EXPR_ERROR
                err_code = st
                break
            for i in range(n):
                x2[i] = xc[i] + 0.5 * h * vc[i]
                v2[i] = vc[i] + 0.5 * h * k1[i]
            if not inside(n, x2, &lo_v[0], &hi_v[0]):
                status = GEO_LEFT_DOMAIN
                break
            st = accel(m, &ops[0], &arg_a[0], &arg_b[0], &consts[0], &outputs[0], symp,
                       n, nh, &pk[0], &pl[0], x2, v2, rv, rg, rh, mat, rhs, k2, &err_instr)
            if st != 0:
                status = GEO_DEGENERATE if st < 0 else GEO_EXPR_ERROR
                err_code = st
                break
            for i in range(n):
                x3[i] = xc[i] + 0.5 * h * v2[i]
                v3[i] = vc[i] + 0.5 * h * k2[i]
            if not inside(n, x3, &lo_v[0], &hi_v[0]):
                status = GEO_LEFT_DOMAIN
                break
            st = accel(m, &ops[0], &arg_a[0], &arg_b[0], &consts[0], &outputs[0], symp,
                       n, nh, &pk[0], &pl[0], x3, v3, rv, rg, rh, mat, rhs, k3, &err_instr)
            if st != 0:
                status = GEO_DEGENERATE if st < 0 else GEO_EXPR_ERROR
                err_code = st
                break
            for i in range(n):
                x4[i] = xc[i] + h * v3[i]
                v4[i] = vc[i] + h * k3[i]
            if not inside(n, x4, &lo_v[0], &hi_v[0]):
                status = GEO_LEFT_DOMAIN
                break
            st = accel(m, &ops[0], &arg_a[0], &arg_b[0], &consts[0], &outputs[0], symp,
                       n, nh, &pk[0], &pl[0], x4, v4, rv, rg, rh, mat, rhs, k4, &err_instr)
            if st != 0:
                status = GEO_DEGENERATE if st < 0 else GEO_EXPR_ERROR
                err_code = st
                break
            for i in range(n):
                xs[s + 1, i] = xc[i] + h / 6.0 * (vc[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])
                vs[s + 1, i] = vc[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not inside(n, &xs[s + 1, 0], &lo_v[0], &hi_v[0]):
                status = GEO_LEFT_DOMAIN
                break
            ts[s + 1] = t0 + (s + 1) * h
            count = s + 2
    free(rv)
    free(rg)
    free(rh)
    free(mat)
    free(rhs)
    free(work)
    return ts_arr, xs_arr, vs_arr, count, status, err_instr, err_code
