"""Numba-compiled integration kernels.

Same call surface as ``_kernels_numpy``.  Matrix products are written as
explicit loops: the working dimensions are tiny (2..64) and BLAS dispatch
overhead would dominate.  Diagnostics are stored on the kept grid
{0, stride, 2*stride, ..., n}; the control is still evaluated every step.

Controller kinds: 0 constant (param = value), 1 continuous law,
2 hysteresis switching (param = gamma).  Region codes match control.py.
"""

import numpy as np
from numba import njit, prange

STATUS_OK = 0
STATUS_DEGENERATE = 1

_TRACE_FLOOR = 1e-14


@njit(cache=True, inline="always")
def _mm(a, b, out):
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            s = 0.0 + 0.0j
            for k in range(d):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@njit(cache=True)
def _drift_h(h, ls, ldl, rho, out, t1):
    """out = -i[h, rho] + sum_k L rho L^dag - (ldl rho + rho ldl)/2.

    Assumes rho Hermitian (the integrators keep it so).
    """
    d = rho.shape[0]
    _mm(h, rho, t1)
    for i in range(d):
        for j in range(d):
            out[i, j] = -1j * (t1[i, j] - np.conj(t1[j, i]))
    for kk in range(ls.shape[0]):
        lk = ls[kk]
        _mm(lk, rho, t1)
        for i in range(d):
            for j in range(d):
                s = 0.0 + 0.0j
                for k in range(d):
                    s += t1[i, k] * np.conj(lk[j, k])
                out[i, j] += s
    _mm(ldl, rho, t1)
    for i in range(d):
        for j in range(d):
            out[i, j] -= 0.5 * (t1[i, j] + np.conj(t1[j, i]))


@njit(cache=True)
def _project_2x2(rho):
    """In-place physicality projection, closed-form eigensystem."""
    a = rho[0, 0].real
    c = rho[1, 1].real
    b = 0.5 * (rho[0, 1] + np.conj(rho[1, 0]))
    m = 0.5 * (a + c)
    s = np.sqrt(0.25 * (a - c) ** 2 + b.real ** 2 + b.imag ** 2)
    lo = m - s
    hi = m + s
    if lo >= 0.0:
        t = a + c
        if t <= _TRACE_FLOOR:
            return STATUS_DEGENERATE
        rho[0, 0] = a / t
        rho[0, 1] = b / t
        rho[1, 0] = np.conj(b) / t
        rho[1, 1] = c / t
        return STATUS_OK
    if hi <= _TRACE_FLOOR:
        return STATUS_DEGENERATE
    # clip the negative eigenvalue: the result is the pure state along the
    # dominant eigenvector; pick the more stable of the two component forms
    if (hi - a) * (hi - a) >= (hi - c) * (hi - c):
        v0 = b
        v1 = hi - a + 0.0j
    else:
        v0 = hi - c + 0.0j
        v1 = np.conj(b)
    n2 = v0.real ** 2 + v0.imag ** 2 + v1.real ** 2 + v1.imag ** 2
    if n2 <= _TRACE_FLOOR:
        return STATUS_DEGENERATE
    rho[0, 0] = (v0.real ** 2 + v0.imag ** 2) / n2
    rho[0, 1] = v0 * np.conj(v1) / n2
    rho[1, 0] = np.conj(rho[0, 1])
    rho[1, 1] = (v1.real ** 2 + v1.imag ** 2) / n2
    return STATUS_OK


@njit(cache=True)
def _project_nd(rho, th):
    d = rho.shape[0]
    for i in range(d):
        for j in range(d):
            th[i, j] = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
    w, v = np.linalg.eigh(th)
    total = 0.0
    for i in range(d):
        if w[i] < 0.0:
            w[i] = 0.0
        total += w[i]
    if total <= _TRACE_FLOOR:
        return STATUS_DEGENERATE
    for i in range(d):
        for j in range(d):
            s = 0.0 + 0.0j
            for k in range(d):
                s += v[i, k] * (w[k] / total) * np.conj(v[j, k])
            rho[i, j] = s
    return STATUS_OK


@njit(cache=True, inline="always")
def _re_trace_prod(a, b):
    """Re tr(a @ b)."""
    d = a.shape[0]
    s = 0.0
    for i in range(d):
        for j in range(d):
            s += a[i, j].real * b[j, i].real - a[i, j].imag * b[j, i].imag
    return s


@njit(cache=True, inline="always")
def _im_trace_prod(a, b):
    """Im tr(a @ b)."""
    d = a.shape[0]
    s = 0.0
    for i in range(d):
        for j in range(d):
            s += a[i, j].real * b[j, i].imag + a[i, j].imag * b[j, i].real
    return s


@njit(cache=True)
def sme_core(h_o, h_f, l0, ls, ldl, eta, rho0, dt, dw, kind, param, rho_d, has_rd,
             p_s, stride, states, v1, v2, fid, u_out, dy_out, region_out):
    """Euler-Maruyama integration of the conditioned-state equation with
    per-step physicality projection.

    Returns (status, bad_step, max pre-projection trace defect).
    """
    d = rho0.shape[0]
    n = dw.shape[0]
    rho = rho0.copy()
    t1 = np.empty((d, d), dtype=np.complex128)
    dr = np.empty((d, d), dtype=np.complex128)
    gm = np.empty((d, d), dtype=np.complex128)
    hcomb = np.empty((d, d), dtype=np.complex128)
    th = np.empty((d, d), dtype=np.complex128)
    # commutator [rho_d, H_f]; the continuous law is Im tr(K rho)
    kmat = np.empty((d, d), dtype=np.complex128)
    _mm(rho_d, h_f, kmat)
    _mm(h_f, rho_d, t1)
    for i in range(d):
        for j in range(d):
            kmat[i, j] -= t1[i, j]
    sq = np.sqrt(eta)
    gamma = param
    region = -1
    last_dy = 0.0
    max_terr = 0.0
    kidx = 0
    for it in range(n + 1):
        f = _re_trace_prod(rho_d, rho)
        if kind == 0:
            u = param
        elif kind == 1:
            u = _im_trace_prod(kmat, rho)
        else:
            if f >= gamma:
                region = 0
            elif f <= 0.5 * gamma:
                region = 1
            elif region == 0:
                region = 2
            elif region == 1:
                region = 3
            elif region == -1:
                region = 3
            if region == 0 or region == 2:
                u = _im_trace_prod(kmat, rho)
            else:
                u = 1.0
        if it % stride == 0 or it == n:
            for i in range(d):
                for j in range(d):
                    states[kidx, i, j] = rho[i, j]
            v1[kidx] = 1.0 - _re_trace_prod(p_s, rho)
            if has_rd != 0:
                fid[kidx] = f
                v2[kidx] = 1.0 - f * f
            else:
                fid[kidx] = np.nan
                v2[kidx] = np.nan
            u_out[kidx] = u
            dy_out[kidx] = last_dy
            region_out[kidx] = region
            kidx += 1
        if it == n:
            break
        for i in range(d):
            for j in range(d):
                hcomb[i, j] = h_o[i, j] + u * h_f[i, j]
        _drift_h(hcomb, ls, ldl, rho, dr, t1)
        _mm(l0, rho, t1)
        tr_s = 0.0
        for i in range(d):
            tr_s += 2.0 * t1[i, i].real
        for i in range(d):
            for j in range(d):
                gm[i, j] = sq * (t1[i, j] + np.conj(t1[j, i]) - tr_s * rho[i, j])
        dwv = dw[it]
        last_dy = sq * 0.5 * tr_s * dt + dwv
        tr_re = 0.0
        tr_im = 0.0
        for i in range(d):
            for j in range(d):
                rho[i, j] = rho[i, j] + dr[i, j] * dt + gm[i, j] * dwv
            tr_re += rho[i, i].real
            tr_im += rho[i, i].imag
        terr = np.sqrt((tr_re - 1.0) ** 2 + tr_im ** 2)
        if terr > max_terr:
            max_terr = terr
        if d == 2:
            status = _project_2x2(rho)
        else:
            status = _project_nd(rho, th)
        if status != STATUS_OK:
            return status, it, max_terr
    return STATUS_OK, -1, max_terr


@njit(cache=True, parallel=True)
def sme_chunk(h_o, h_f, l0, ls, ldl, eta, rho0, dt, dws, kind, param, rho_d, has_rd,
              p_s, stride, states, v1, v2, fid, u_out, dy_out, region_out,
              status, bad_step, trace_err):
    for i in prange(dws.shape[0]):
        st, bs, te = sme_core(
            h_o, h_f, l0, ls, ldl, eta, rho0, dt, dws[i], kind, param, rho_d,
            has_rd, p_s, stride, states[i], v1[i], v2[i], fid[i], u_out[i],
            dy_out[i], region_out[i],
        )
        status[i] = st
        bad_step[i] = bs
        trace_err[i] = te


@njit(cache=True)
def me_core(h, ls, ldl, rho0, dt, n_steps, stride, states):
    """Classical RK4 on the deterministic part of the dynamics."""
    d = rho0.shape[0]
    rho = rho0.copy()
    t1 = np.empty((d, d), dtype=np.complex128)
    k1 = np.empty((d, d), dtype=np.complex128)
    k2 = np.empty((d, d), dtype=np.complex128)
    k3 = np.empty((d, d), dtype=np.complex128)
    k4 = np.empty((d, d), dtype=np.complex128)
    stage = np.empty((d, d), dtype=np.complex128)
    kidx = 0
    for it in range(n_steps + 1):
        if it % stride == 0 or it == n_steps:
            for i in range(d):
                for j in range(d):
                    states[kidx, i, j] = rho[i, j]
            kidx += 1
        if it == n_steps:
            break
        _drift_h(h, ls, ldl, rho, k1, t1)
        for i in range(d):
            for j in range(d):
                stage[i, j] = rho[i, j] + 0.5 * dt * k1[i, j]
        _drift_h(h, ls, ldl, stage, k2, t1)
        for i in range(d):
            for j in range(d):
                stage[i, j] = rho[i, j] + 0.5 * dt * k2[i, j]
        _drift_h(h, ls, ldl, stage, k3, t1)
        for i in range(d):
            for j in range(d):
                stage[i, j] = rho[i, j] + dt * k3[i, j]
        _drift_h(h, ls, ldl, stage, k4, t1)
        for i in range(d):
            for j in range(d):
                rho[i, j] += (dt / 6.0) * (
                    k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j]
                )
