"""Pure-Python RK4 integrator for the single-machine frequency model.

Mirrors ``_kernel.pyx`` operation for operation so both backends give the same
trajectories to rounding. Used when the compiled extension is unavailable or
``HVDC_CBA_KERNEL=python`` is set.
"""
import math

import numpy as np

OK = 0
NON_FINITE = 1


def _reserve(t, trig, blk, delay, ramp, group, which):
    total = 0.0
    for k in range(len(trig)):
        if group[k] != which or math.isnan(trig[k]):
            continue
        x = t - trig[k] - delay[k]
        if x <= 0.0:
            continue
        if ramp[k] <= 0.0 or x >= ramp[k]:
            total += blk[k]
        else:
            total += blk[k] * x / ramp[k]
    return total


def integrate(
    f0, ek_mws, dp, onset, fcr_mw, band_hi, band_lo, lag, kload, shed_hz,
    thr, blk, delay, ramp, sustain, group, dt, n_steps, record,
):
    """Integrate the swing equation with FCR lag and stepped reserves.

    Returns ``(status, nadir, nadir_t, shed, first_trigger, samples, fail_t)``.
    ``samples`` has columns t, f, p_fcr, p_ffr, p_epc when ``record`` is true.
    """
    nres = len(thr)
    trig = [math.nan] * nres
    first = [math.nan] * nres
    inv_m = f0 / (2.0 * ek_mws)
    inv_band = 1.0 / (band_hi - band_lo)
    inv_lag = 1.0 / lag

    def rhs(t, df, p):
        f = f0 + df
        x = (band_hi - f) * inv_band
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
        dist = dp if t >= onset else 0.0
        pres = _reserve(t, trig, blk, delay, ramp, group, 0) + _reserve(t, trig, blk, delay, ramp, group, 1)
        return inv_m * (p + pres - dist - kload * df), (fcr_mw * x - p) * inv_lag

    samples = np.empty((n_steps + 1, 5)) if record else None
    df = 0.0
    p = 0.0
    t = 0.0
    nadir = f0
    nadir_t = 0.0
    shed = False
    if record:
        samples[0] = (0.0, f0, 0.0, 0.0, 0.0)

    h2 = 0.5 * dt
    h6 = dt / 6.0
    for i in range(1, n_steps + 1):
        a1, b1 = rhs(t, df, p)
        a2, b2 = rhs(t + h2, df + h2 * a1, p + h2 * b1)
        a3, b3 = rhs(t + h2, df + h2 * a2, p + h2 * b2)
        a4, b4 = rhs(t + dt, df + dt * a3, p + dt * b3)
        df = df + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        p = p + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        t = i * dt
        if not (math.isfinite(df) and math.isfinite(p)):
            return NON_FINITE, nadir, nadir_t, shed, first, samples, t

        f = f0 + df
        for k in range(nres):
            if math.isnan(trig[k]):
                if f <= thr[k]:
                    trig[k] = t
                    if math.isnan(first[k]):
                        first[k] = t
            elif not sustain[k] and f > thr[k]:
                trig[k] = math.nan

        if f < shed_hz:
            shed = True
            f = shed_hz
        if f < nadir:
            nadir = f
            nadir_t = t
        if record:
            samples[i, 0] = t
            samples[i, 1] = f
            samples[i, 2] = p
            samples[i, 3] = _reserve(t, trig, blk, delay, ramp, group, 0)
            samples[i, 4] = _reserve(t, trig, blk, delay, ramp, group, 1)
    return OK, nadir, nadir_t, shed, first, samples, t
