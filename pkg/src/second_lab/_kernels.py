"""Compiled inner loops: waveform evaluation, right-hand sides, and an
embedded Dormand-Prince 5(4) stepper with exact landing on sample times.

Everything here works on the flat arrays produced by ``dynamics.pack_model``;
the Python-visible API lives in ``integrate``.  The stepper integrates a
complex state vector y of length dim (+ 1 + n_channels when the decay-event
bookkeeping components are appended) and records y exactly at the requested
sample times by clipping steps, never by interpolation.  All arithmetic is
plain IEEE double; for fixed inputs the output is bit-reproducible.
"""

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi

# status codes returned by the stepper
OK = 0
STEP_UNDERFLOW = 1
NONFINITE = 2

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)


@njit(cache=True, nogil=True)
def wf_eval(kind, value, coeffs, ncoeff, tau, t):
    if kind == 0:
        return value
    acc = coeffs[0]
    x = TWO_PI * t / tau
    for n in range(1, ncoeff):
        acc += 2.0 * coeffs[n] * np.cos(n * x)
    return TWO_PI * acc / (2.0 * (ncoeff - 1) + 1.0)


@njit(cache=True, nogil=True)
def rhs_into(
    t,
    y,
    dy,
    mode,
    aug,
    dim,
    rows,
    cols,
    scales,
    wf_kind,
    wf_value,
    wf_coeffs,
    wf_ncoeff,
    wf_tau,
    half_rates,
    ch_src,
    ch_rate,
):
    for i in range(dy.shape[0]):
        dy[i] = 0.0 + 0.0j
    for e in range(rows.shape[0]):
        w = wf_eval(wf_kind[e], wf_value[e], wf_coeffs[e], wf_ncoeff[e], wf_tau[e], t)
        h = scales[e] * w
        r = rows[e]
        c = cols[e]
        dy[r] += -1j * h * y[c]
        if r != c:
            dy[c] += -1j * h.conjugate() * y[r]
    if mode >= 1:
        for i in range(dim):
            dy[i] -= half_rates[i] * y[i]
    if mode == 2:
        s = 0.0
        for m in range(ch_src.shape[0]):
            a = y[ch_src[m]]
            s += 0.5 * ch_rate[m] * (a.real * a.real + a.imag * a.imag)
        for i in range(dim):
            dy[i] += s * y[i]
    if aug == 1:
        # y[dim] carries the no-decay probability, y[dim+1+m] the cumulative
        # probability that the first decay event lands in channel m.
        p0 = y[dim].real
        total = 0.0
        for m in range(ch_src.shape[0]):
            a = y[ch_src[m]]
            w2 = ch_rate[m] * (a.real * a.real + a.imag * a.imag)
            dy[dim + 1 + m] = complex(w2 * p0, 0.0)
            total += w2
        dy[dim] = complex(-total * p0, 0.0)


@njit(cache=True, nogil=True)
def _all_finite(v):
    for i in range(v.shape[0]):
        x = v[i]
        if not (np.isfinite(x.real) and np.isfinite(x.imag)):
            return False
    return True


@njit(cache=True, nogil=True)
def dp5_integrate(
    y0,
    t0,
    sample_times,
    mode,
    aug,
    dim,
    rows,
    cols,
    scales,
    wf_kind,
    wf_value,
    wf_coeffs,
    wf_ncoeff,
    wf_tau,
    half_rates,
    ch_src,
    ch_rate,
    rtol,
    atol,
    max_step,
    h_init,
):
    """Integrate from t0, recording the state at every entry of sample_times
    (strictly increasing, all >= t0).  Returns (status, t_bad, h_last, out).
    """
    ny = y0.shape[0]
    ns = sample_times.shape[0]
    out = np.zeros((ns, ny), dtype=np.complex128)

    y = y0.copy()
    ynew = np.empty(ny, dtype=np.complex128)
    ytmp = np.empty(ny, dtype=np.complex128)
    k1 = np.empty(ny, dtype=np.complex128)
    k2 = np.empty(ny, dtype=np.complex128)
    k3 = np.empty(ny, dtype=np.complex128)
    k4 = np.empty(ny, dtype=np.complex128)
    k5 = np.empty(ny, dtype=np.complex128)
    k6 = np.empty(ny, dtype=np.complex128)
    k7 = np.empty(ny, dtype=np.complex128)

    t = t0
    si = 0
    if ns > 0 and sample_times[0] == t0:
        for i in range(ny):
            out[0, i] = y[i]
        si = 1

    rhs_into(t, y, k1, mode, aug, dim, rows, cols, scales, wf_kind, wf_value,
             wf_coeffs, wf_ncoeff, wf_tau, half_rates, ch_src, ch_rate)
    if not _all_finite(k1):
        return NONFINITE, t, h_init, out

    h = h_init
    if h > max_step:
        h = max_step

    while si < ns:
        target = sample_times[si]
        span_left = target - t
        if span_left <= 0.0:
            for i in range(ny):
                out[si, i] = y[i]
            si += 1
            continue

        landed = False
        htry = h
        if htry > max_step:
            htry = max_step
        if htry >= span_left:
            htry = span_left
            landed = True

        hmin = 1e-14 * max(abs(t), abs(target), 1.0)
        if htry < hmin:
            return STEP_UNDERFLOW, t, h, out

        # stages
        for i in range(ny):
            ytmp[i] = y[i] + htry * _A21 * k1[i]
        rhs_into(t + _C2 * htry, ytmp, k2, mode, aug, dim, rows, cols, scales, wf_kind,
                 wf_value, wf_coeffs, wf_ncoeff, wf_tau, half_rates, ch_src, ch_rate)
        for i in range(ny):
            ytmp[i] = y[i] + htry * (_A31 * k1[i] + _A32 * k2[i])
        rhs_into(t + _C3 * htry, ytmp, k3, mode, aug, dim, rows, cols, scales, wf_kind,
                 wf_value, wf_coeffs, wf_ncoeff, wf_tau, half_rates, ch_src, ch_rate)
        for i in range(ny):
            ytmp[i] = y[i] + htry * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        rhs_into(t + _C4 * htry, ytmp, k4, mode, aug, dim, rows, cols, scales, wf_kind,
                 wf_value, wf_coeffs, wf_ncoeff, wf_tau, half_rates, ch_src, ch_rate)
        for i in range(ny):
            ytmp[i] = y[i] + htry * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        rhs_into(t + _C5 * htry, ytmp, k5, mode, aug, dim, rows, cols, scales, wf_kind,
                 wf_value, wf_coeffs, wf_ncoeff, wf_tau, half_rates, ch_src, ch_rate)
        for i in range(ny):
            ytmp[i] = y[i] + htry * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        rhs_into(t + htry, ytmp, k6, mode, aug, dim, rows, cols, scales, wf_kind,
                 wf_value, wf_coeffs, wf_ncoeff, wf_tau, half_rates, ch_src, ch_rate)
        for i in range(ny):
            ynew[i] = y[i] + htry * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        rhs_into(t + htry, ynew, k7, mode, aug, dim, rows, cols, scales, wf_kind,
                 wf_value, wf_coeffs, wf_ncoeff, wf_tau, half_rates, ch_src, ch_rate)

        # weighted rms error of the embedded 4th-order difference
        err_acc = 0.0
        for i in range(ny):
            ei = htry * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                + _E6 * k6[i] + _E7 * k7[i]
            )
            ay = abs(y[i])
            an = abs(ynew[i])
            sc = atol + rtol * (ay if ay > an else an)
            q = abs(ei) / sc
            err_acc += q * q
        err = np.sqrt(err_acc / ny)

        if not np.isfinite(err):
            h = htry * 0.1
            continue

        if err <= 1.0:
            t_new = target if landed else t + htry
            t = t_new
            for i in range(ny):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if landed:
                for i in range(ny):
                    out[si, i] = y[i]
                si += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * err ** -0.2
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            h = htry * fac
            if h > max_step:
                h = max_step
        else:
            fac = 0.9 * err ** -0.2
            if fac < 0.1:
                fac = 0.1
            h = htry * fac

    return OK, t, h, out
