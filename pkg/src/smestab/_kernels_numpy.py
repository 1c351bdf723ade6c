"""Pure-numpy fallback kernels; same call surface as ``_kernels_numba``.

Selected with SMESTAB_BACKEND=numpy or when numba is unavailable.  Slower by
one to two orders of magnitude on small dimensions, used as the reference
implementation in the backend-equivalence tests and the benchmark.
"""

import numpy as np

from .core import dagger, project_to_physical
from .errors import DegenerateStateError

STATUS_OK = 0
STATUS_DEGENERATE = 1


def _drift_h(h, ls, ldl, rho):
    out = -1j * (h @ rho - rho @ h)
    for lk in ls:
        out += lk @ rho @ dagger(lk)
    a = ldl @ rho
    out -= 0.5 * (a + dagger(a))
    return out


def sme_core(h_o, h_f, l0, ls, ldl, eta, rho0, dt, dw, kind, param, rho_d, has_rd,
             p_s, stride, states, v1, v2, fid, u_out, dy_out, region_out):
    d = rho0.shape[0]
    n = dw.shape[0]
    rho = rho0.copy()
    kmat = rho_d @ h_f - h_f @ rho_d
    sq = np.sqrt(eta)
    gamma = param
    region = -1
    last_dy = 0.0
    max_terr = 0.0
    kidx = 0
    for it in range(n + 1):
        f = np.trace(rho_d @ rho).real
        if kind == 0:
            u = param
        elif kind == 1:
            u = np.trace(kmat @ rho).imag
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
            u = np.trace(kmat @ rho).imag if region in (0, 2) else 1.0
        if it % stride == 0 or it == n:
            states[kidx] = rho
            v1[kidx] = 1.0 - np.trace(p_s @ rho).real
            if has_rd:
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
        drift = _drift_h(h_o + u * h_f, ls, ldl, rho)
        lr = l0 @ rho
        tr_s = 2.0 * np.trace(lr).real
        g = sq * (lr + dagger(lr) - tr_s * rho)
        dwv = dw[it]
        last_dy = sq * 0.5 * tr_s * dt + dwv
        rho = rho + drift * dt + g * dwv
        terr = abs(np.trace(rho) - 1.0)
        if terr > max_terr:
            max_terr = terr
        try:
            rho = project_to_physical(rho)
        except DegenerateStateError:
            return STATUS_DEGENERATE, it, max_terr
    return STATUS_OK, -1, max_terr


def sme_chunk(h_o, h_f, l0, ls, ldl, eta, rho0, dt, dws, kind, param, rho_d, has_rd,
              p_s, stride, states, v1, v2, fid, u_out, dy_out, region_out,
              status, bad_step, trace_err):
    for i in range(dws.shape[0]):
        st, bs, te = sme_core(
            h_o, h_f, l0, ls, ldl, eta, rho0, dt, dws[i], kind, param, rho_d,
            has_rd, p_s, stride, states[i], v1[i], v2[i], fid[i], u_out[i],
            dy_out[i], region_out[i],
        )
        status[i] = st
        bad_step[i] = bs
        trace_err[i] = te


def me_core(h, ls, ldl, rho0, dt, n_steps, stride, states):
    rho = rho0.copy()
    kidx = 0
    for it in range(n_steps + 1):
        if it % stride == 0 or it == n_steps:
            states[kidx] = rho
            kidx += 1
        if it == n_steps:
            break
        k1 = _drift_h(h, ls, ldl, rho)
        k2 = _drift_h(h, ls, ldl, rho + 0.5 * dt * k1)
        k3 = _drift_h(h, ls, ldl, rho + 0.5 * dt * k2)
        k4 = _drift_h(h, ls, ldl, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
