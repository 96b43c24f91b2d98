# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 integrator for the single-machine frequency model.

Same arithmetic, in the same order, as ``_kernel_py.integrate``.
"""
import numpy as np

from libc.math cimport isfinite, isnan, NAN

cdef enum:
    MAX_RES = 64

cdef int OK = 0
cdef int NON_FINITE = 1


cdef inline double _reserve(double t, double* trig, double* blk, double* delay,
                            double* ramp, int* group, int nres, int which) noexcept nogil:
    cdef double total = 0.0
    cdef double x
    cdef int k
    for k in range(nres):
        if group[k] != which or isnan(trig[k]):
            continue
        x = t - trig[k] - delay[k]
        if x <= 0.0:
            continue
        if ramp[k] <= 0.0 or x >= ramp[k]:
            total += blk[k]
        else:
            total += blk[k] * x / ramp[k]
    return total


cdef struct Params:
    double f0
    double inv_m
    double dp
    double onset
    double fcr_mw
    double band_hi
    double inv_band
    double inv_lag
    double kload


cdef inline void _rhs(Params* q, double t, double df, double p,
                      double* trig, double* blk, double* delay, double* ramp,
                      int* group, int nres, double* out_df, double* out_p) noexcept nogil:
    cdef double f = q.f0 + df
    cdef double x = (q.band_hi - f) * q.inv_band
    cdef double dist, pres
    if x < 0.0:
        x = 0.0
    elif x > 1.0:
        x = 1.0
    dist = q.dp if t >= q.onset else 0.0
    pres = (_reserve(t, trig, blk, delay, ramp, group, nres, 0)
            + _reserve(t, trig, blk, delay, ramp, group, nres, 1))
    out_df[0] = q.inv_m * (p + pres - dist - q.kload * df)
    out_p[0] = (q.fcr_mw * x - p) * q.inv_lag


def integrate(double f0, double ek_mws, double dp, double onset, double fcr_mw,
              double band_hi, double band_lo, double lag, double kload, double shed_hz,
              thr_in, blk_in, delay_in, ramp_in, sustain_in, group_in,
              double dt, long n_steps, bint record):
    cdef int nres = len(thr_in)
    if nres > MAX_RES:
        raise ValueError("too many reserve triggers")
    cdef double thr[MAX_RES]
    cdef double blk[MAX_RES]
    cdef double delay[MAX_RES]
    cdef double ramp[MAX_RES]
    cdef int sustain[MAX_RES]
    cdef int group[MAX_RES]
    cdef double trig[MAX_RES]
    cdef double first[MAX_RES]
    cdef int k
    for k in range(nres):
        thr[k] = thr_in[k]
        blk[k] = blk_in[k]
        delay[k] = delay_in[k]
        ramp[k] = ramp_in[k]
        sustain[k] = 1 if sustain_in[k] else 0
        group[k] = group_in[k]
        trig[k] = NAN
        first[k] = NAN

    cdef Params q
    q.f0 = f0
    q.inv_m = f0 / (2.0 * ek_mws)
    q.dp = dp
    q.onset = onset
    q.fcr_mw = fcr_mw
    q.band_hi = band_hi
    q.inv_band = 1.0 / (band_hi - band_lo)
    q.inv_lag = 1.0 / lag
    q.kload = kload

    samples = np.empty((n_steps + 1, 5)) if record else None
    cdef double[:, ::1] s
    if record:
        s = samples
        s[0, 0] = 0.0
        s[0, 1] = f0
        s[0, 2] = 0.0
        s[0, 3] = 0.0
        s[0, 4] = 0.0

    cdef double df = 0.0, p = 0.0, t = 0.0, f
    cdef double nadir = f0, nadir_t = 0.0
    cdef bint shed = False
    cdef double h2 = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef double a1, a2, a3, a4, b1, b2, b3, b4
    cdef long i
    cdef int status = OK

    with nogil:
        for i in range(1, n_steps + 1):
            _rhs(&q, t, df, p, trig, blk, delay, ramp, group, nres, &a1, &b1)
            _rhs(&q, t + h2, df + h2 * a1, p + h2 * b1, trig, blk, delay, ramp, group, nres, &a2, &b2)
            _rhs(&q, t + h2, df + h2 * a2, p + h2 * b2, trig, blk, delay, ramp, group, nres, &a3, &b3)
            _rhs(&q, t + dt, df + dt * a3, p + dt * b3, trig, blk, delay, ramp, group, nres, &a4, &b4)
            df = df + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            p = p + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            t = i * dt
            if not (isfinite(df) and isfinite(p)):
                status = NON_FINITE
                break

            f = f0 + df
            for k in range(nres):
                if isnan(trig[k]):
                    if f <= thr[k]:
                        trig[k] = t
                        if isnan(first[k]):
                            first[k] = t
                elif not sustain[k] and f > thr[k]:
                    trig[k] = NAN

            if f < shed_hz:
                shed = True
                f = shed_hz
            if f < nadir:
                nadir = f
                nadir_t = t
            if record:
                s[i, 0] = t
                s[i, 1] = f
                s[i, 2] = p
                s[i, 3] = _reserve(t, trig, blk, delay, ramp, group, nres, 0)
                s[i, 4] = _reserve(t, trig, blk, delay, ramp, group, nres, 1)

    return status, nadir, nadir_t, shed, [first[k] for k in range(nres)], samples, t
