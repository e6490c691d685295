# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; same contracts as ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, fabs, INFINITY

cnp.import_array()

cdef double _SMALL = 1e-8


cdef inline double _int_cos(double nu, double tau) noexcept nogil:
    if fabs(nu * tau) < _SMALL:
        return tau
    return sin(nu * tau) / nu


cdef inline double _int_sin(double nu, double tau) noexcept nogil:
    cdef double h
    if nu == 0.0:
        return 0.0
    h = sin(0.5 * nu * tau)
    return 2.0 * h * h / nu


cdef void _gram(const double[::1] freq, const double[::1] ac, const double[::1] as_,
                double tau, double[:, ::1] g) noexcept nogil:
    cdef Py_ssize_t m = freq.shape[0], i, j
    cdef double a, b, icm, icp, cc, ss, cs_ij, cs_ji
    for i in range(m):
        a = freq[i]
        for j in range(i, m):
            b = freq[j]
            icm = _int_cos(a - b, tau)
            icp = _int_cos(a + b, tau)
            cc = 0.5 * (icm + icp)
            ss = 0.5 * (icm - icp)
            cs_ij = 0.5 * (_int_sin(a + b, tau) + _int_sin(b - a, tau))
            cs_ji = 0.5 * (_int_sin(a + b, tau) + _int_sin(a - b, tau))
            g[i, j] = ac[i] * ac[j] * cc + ac[i] * as_[j] * cs_ij + as_[i] * ac[j] * cs_ji + as_[i] * as_[j] * ss
            g[j, i] = g[i, j]


def segment_gram(omega, qm, pm, double tau):
    cdef Py_ssize_t n = len(omega), k
    om = np.ascontiguousarray(omega, dtype=np.float64)
    freq = np.concatenate([om, om])
    ac = np.concatenate([np.asarray(qm, dtype=np.float64), np.asarray(pm, dtype=np.float64)])
    as_ = np.concatenate([np.asarray(pm, dtype=np.float64) / om, -om * np.asarray(qm, dtype=np.float64)])
    g = np.empty((2 * n, 2 * n))
    _gram(freq, ac, as_, tau, g)
    return g


def pdmp_run(omega, beta, qm, pm, taus, double t_elapsed, double t_end, forms):
    cdef const double[::1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const double[::1] be = np.ascontiguousarray(beta, dtype=np.float64)
    cdef double[::1] q = np.array(qm, dtype=np.float64)
    cdef double[::1] p = np.array(pm, dtype=np.float64)
    cdef const double[::1] ts = np.ascontiguousarray(taus, dtype=np.float64)
    cdef const double[:, :, ::1] fm = np.ascontiguousarray(forms, dtype=np.float64).reshape(
        len(forms), 2 * len(omega), 2 * len(omega))
    cdef Py_ssize_t n = om.shape[0], nk = fm.shape[0], m = ts.shape[0]
    cdef Py_ssize_t i, j, k, a, b
    cdef double[::1] freq = np.empty(2 * n)
    cdef double[::1] ac = np.empty(2 * n)
    cdef double[::1] as_ = np.empty(2 * n)
    cdef double[:, ::1] g = np.empty((2 * n, 2 * n))
    integrals_arr = np.zeros(nk)
    cdef double[::1] integrals = integrals_arr
    cdef double tau, nxt, seg, c, s, qq, pp, p1, acc
    cdef Py_ssize_t n_flips = 0
    cdef bint done = False
    for j in range(n):
        freq[j] = om[j]
        freq[n + j] = om[j]
    with nogil:
        for i in range(m):
            tau = ts[i]
            nxt = t_elapsed + tau
            if nxt <= t_end:
                seg = tau
            else:
                seg = t_end - t_elapsed
            if nk > 0 and seg > 0:
                for j in range(n):
                    ac[j] = q[j]
                    ac[n + j] = p[j]
                    as_[j] = p[j] / om[j]
                    as_[n + j] = -om[j] * q[j]
                _gram(freq, ac, as_, seg, g)
                for k in range(nk):
                    acc = 0.0
                    for a in range(2 * n):
                        for b in range(2 * n):
                            acc += fm[k, a, b] * g[a, b]
                    integrals[k] += acc
            for j in range(n):
                c = cos(om[j] * seg)
                s = sin(om[j] * seg)
                qq = q[j]
                pp = p[j]
                q[j] = c * qq + (s / om[j]) * pp
                p[j] = -om[j] * s * qq + c * pp
            if nxt <= t_end:
                p1 = 0.0
                for j in range(n):
                    p1 += be[j] * p[j]
                for j in range(n):
                    p[j] = p[j] - 2.0 * p1 * be[j]
                t_elapsed = nxt
                n_flips += 1
                if nxt == t_end:
                    done = True
                    break
            else:
                t_elapsed = t_end
                done = True
                break
    return n_flips, t_elapsed, integrals_arr, np.asarray(q), np.asarray(p), bool(done)


def chain_run(omega, beta, qm, pm, taus, Py_ssize_t skip, Py_ssize_t thin):
    cdef const double[::1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const double[::1] be = np.ascontiguousarray(beta, dtype=np.float64)
    cdef double[::1] q = np.array(qm, dtype=np.float64)
    cdef double[::1] p = np.array(pm, dtype=np.float64)
    cdef const double[::1] ts = np.ascontiguousarray(taus, dtype=np.float64)
    cdef Py_ssize_t n = om.shape[0], m = ts.shape[0], i, j, row = 0
    cdef Py_ssize_t n_keep = 0 if m <= skip else (m - skip + thin - 1) // thin
    kept_arr = np.empty((n_keep, 2 * n))
    cdef double[:, ::1] kept = kept_arr
    cdef double tau, c, s, qq, pp, p1
    with nogil:
        for i in range(m):
            tau = ts[i]
            for j in range(n):
                c = cos(om[j] * tau)
                s = sin(om[j] * tau)
                qq = q[j]
                pp = p[j]
                q[j] = c * qq + (s / om[j]) * pp
                p[j] = -om[j] * s * qq + c * pp
            p1 = 0.0
            for j in range(n):
                p1 += be[j] * p[j]
            for j in range(n):
                p[j] = p[j] - 2.0 * p1 * be[j]
            if i >= skip and (i - skip) % thin == 0:
                for j in range(n):
                    kept[row, j] = q[j]
                    kept[row, n + j] = p[j]
                row += 1
    return kept_arr, np.asarray(q), np.asarray(p)


def scan_modal_distance(qm, pm, omega, qt, pt, wq, wp, double t0, double dt, Py_ssize_t count):
    cdef const double[::1] q0 = np.ascontiguousarray(qm, dtype=np.float64)
    cdef const double[::1] p0 = np.ascontiguousarray(pm, dtype=np.float64)
    cdef const double[::1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const double[::1] tq = np.ascontiguousarray(qt, dtype=np.float64)
    cdef const double[::1] tp = np.ascontiguousarray(pt, dtype=np.float64)
    cdef const double[::1] wq_ = np.ascontiguousarray(wq, dtype=np.float64)
    cdef const double[::1] wp_ = np.ascontiguousarray(wp, dtype=np.float64)
    cdef Py_ssize_t n = om.shape[0], i, j, best_i = 0
    cdef double best_v = INFINITY, t, c, s, dq, dp, val
    with nogil:
        for i in range(count):
            t = t0 + i * dt
            val = 0.0
            for j in range(n):
                c = cos(om[j] * t)
                s = sin(om[j] * t)
                dq = c * q0[j] + s / om[j] * p0[j] - tq[j]
                dp = -om[j] * s * q0[j] + c * p0[j] - tp[j]
                val += wq_[j] * dq * dq + wp_[j] * dp * dp
            if val < best_v:
                best_v = val
                best_i = i
    return int(best_i), float(best_v)


def scan_flip_delta(qm, pm, omega, beta, double t0, double dt, Py_ssize_t count):
    cdef const double[::1] q0 = np.ascontiguousarray(qm, dtype=np.float64)
    cdef const double[::1] p0 = np.ascontiguousarray(pm, dtype=np.float64)
    cdef const double[::1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const double[::1] be = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t n = om.shape[0], i, j, best_i = 0
    cdef double[::1] r2 = np.empty(n)
    cdef double[::1] pt = np.empty(n)
    cdef double best_v = INFINITY, t, p1, sq, g2, gmax, gmin, val
    for j in range(n):
        r2[j] = p0[j] * p0[j] + om[j] * om[j] * q0[j] * q0[j]
    with nogil:
        for i in range(count):
            t = t0 + i * dt
            p1 = 0.0
            for j in range(n):
                pt[j] = -om[j] * sin(om[j] * t) * q0[j] + cos(om[j] * t) * p0[j]
                p1 += be[j] * pt[j]
            gmax = -INFINITY
            gmin = INFINITY
            for j in range(n):
                sq = r2[j] + 4.0 * p1 * p1 * be[j] * be[j] - 4.0 * p1 * be[j] * pt[j]
                if sq < 0.0:
                    sq = 0.0
                g2 = sq / (be[j] * be[j])
                if g2 > gmax:
                    gmax = g2
                if g2 < gmin:
                    gmin = g2
            val = gmax - gmin
            if val < best_v:
                best_v = val
                best_i = i
    return int(best_i), float(best_v)
