# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of ``_corepy``; identical nodes, panels and solves."""

import numpy as np

cimport numpy as cnp
from libc.math cimport erf, exp, fabs, sqrt

from ..errors import EmptyNeighborhood, VanishingDenominator


cnp.import_array()

cdef double GL_X0 = -0.8611363115940526
cdef double GL_X1 = -0.3399810435848563
cdef double GL_X2 = 0.3399810435848563
cdef double GL_X3 = 0.8611363115940526
cdef double GL_W0 = 0.3478548451374538
cdef double GL_W1 = 0.6521451548625461
cdef double GL_W2 = 0.6521451548625461
cdef double GL_W3 = 0.3478548451374538

cdef double INVPHI = 0.6180339887498949
cdef double SQRT2 = 1.4142135623730951
cdef double SQRT2PI = 2.5066282746310002


cdef inline double bw(double z) nogil:
    cdef double t
    if z < -1.0 or z > 1.0:
        return 0.0
    t = 1.0 - z * z
    return 0.9375 * t * t


cdef inline double bw_prime(double z) nogil:
    if z < -1.0 or z > 1.0:
        return 0.0
    return -3.75 * z * (1.0 - z * z)


cdef inline double bw_cdf(double z) nogil:
    cdef double u = z
    if u < -1.0:
        u = -1.0
    elif u > 1.0:
        u = 1.0
    return 0.9375 * (u - 2.0 * u * u * u / 3.0 + u * u * u * u * u / 5.0 + 8.0 / 15.0)


cdef inline double normal_cdf(double z) nogil:
    return 0.5 * (1.0 + erf(z / SQRT2))


cdef inline Py_ssize_t bisect_left(const double* arr, double value, Py_ssize_t n) nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = n
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo


def s1_grid(u_grid, Py_ssize_t idx0, us, xs1, x_nodes, double h_u, double h_x,
            double floor=1e-8):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ug = np.ascontiguousarray(u_grid, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.argsort(np.asarray(us, dtype=np.float64), kind="stable")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(np.asarray(us, dtype=np.float64)[order])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(np.asarray(xs1, dtype=np.float64)[order])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xn = np.ascontiguousarray(x_nodes, dtype=np.float64)
    cdef Py_ssize_t n_u = ug.shape[0]
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t n_x = xn.shape[0]
    cdef Py_ssize_t n_c = n_u - 1

    # kernel weights laid out (x-node, u-sorted observation), plus prefix
    # sums so the below-window CDF contribution is an O(1) lookup
    cdef cnp.ndarray[cnp.float64_t, ndim=2] kxt = np.empty((n_x, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dkxt = np.empty((n_x, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pkx = np.zeros((n_x, n + 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pdkx = np.zeros((n_x, n + 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.zeros(n_x)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ap = np.zeros(n_x)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kubuf = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ckubuf = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cell = np.zeros((n_c, n_x))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s1 = np.empty((n_u, n_x))

    cdef Py_ssize_t i, k, j, g, i_lo, i_hi, t
    cdef double z, lo, hi, half, mid, r, w
    cdef double num, m, npx, den, dfdx1
    cdef double glx[4]
    cdef double glw[4]
    glx[0] = GL_X0; glx[1] = GL_X1; glx[2] = GL_X2; glx[3] = GL_X3
    glw[0] = GL_W0; glw[1] = GL_W1; glw[2] = GL_W2; glw[3] = GL_W3

    cdef long n_clamped = 0
    cdef bint empty = False

    with nogil:
        for k in range(n_x):
            for i in range(n):
                z = (x[i] - xn[k]) / h_x
                kxt[k, i] = bw(z) / h_x
                dkxt[k, i] = -bw_prime(z) / (h_x * h_x)
                pkx[k, i + 1] = pkx[k, i] + kxt[k, i]
                pdkx[k, i + 1] = pdkx[k, i] + dkxt[k, i]
            a[k] = pkx[k, n]
            ap[k] = pdkx[k, n]
            if a[k] <= 1e-300:
                empty = True
        if not empty:
            for j in range(n_c):
                lo = ug[j]
                hi = ug[j + 1]
                half = 0.5 * (hi - lo)
                mid = 0.5 * (hi + lo)
                for g in range(4):
                    r = mid + half * glx[g]
                    w = glw[g] * half
                    # observations with u_i < r - h_u contribute CDF mass 1;
                    # those with u_i > r + h_u contribute nothing
                    i_lo = bisect_left(&u[0], r - h_u, n)
                    i_hi = bisect_left(&u[0], r + h_u, n)
                    for i in range(i_lo, i_hi):
                        z = (r - u[i]) / h_u
                        kubuf[i] = bw(z) / h_u
                        ckubuf[i] = bw_cdf(z)
                    for k in range(n_x):
                        num = 0.0
                        m = pkx[k, i_lo]
                        npx = pdkx[k, i_lo]
                        for i in range(i_lo, i_hi):
                            num += kxt[k, i] * kubuf[i]
                            m += kxt[k, i] * ckubuf[i]
                            npx += dkxt[k, i] * ckubuf[i]
                        den = npx * a[k] - m * ap[k]
                        dfdx1 = den / (a[k] * a[k])
                        if fabs(dfdx1) < floor:
                            n_clamped += 1
                            if dfdx1 < 0.0:
                                den = -floor * a[k] * a[k]
                            else:
                                den = floor * a[k] * a[k]
                        cell[j, k] += w * num * a[k] / den
            for k in range(n_x):
                s1[idx0, k] = 0.0
            for j in range(idx0, n_u - 1):
                for k in range(n_x):
                    s1[j + 1, k] = s1[j, k] + cell[j, k]
            for j in range(idx0 - 1, -1, -1):
                for k in range(n_x):
                    s1[j, k] = s1[j + 1, k] - cell[j, k]

    if empty:
        raise EmptyNeighborhood("no observation within kernel range of a weight node")
    return s1, n_clamped


cdef double _objective(double q, double[::1] rho, double[::1] vw, double b,
                       Py_ssize_t n_x) nogil:
    cdef double s = 0.0
    cdef double t
    cdef Py_ssize_t k
    for k in range(n_x):
        t = rho[k] - q
        s += vw[k] * t * (2.0 * normal_cdf(t / b) - 1.0)
    return s


cdef double _dobjective(double q, double[::1] rho, double[::1] vw, double b,
                        Py_ssize_t n_x) nogil:
    cdef double s = 0.0
    cdef double t, pdf
    cdef Py_ssize_t k
    for k in range(n_x):
        t = rho[k] - q
        pdf = exp(-0.5 * (t / b) * (t / b)) / (SQRT2PI * b)
        s += vw[k] * (-(2.0 * normal_cdf(t / b) - 1.0) - 2.0 * t * pdf)
    return s


cdef double _qhat_one(double[::1] rho, double[::1] vw, double b, double tol,
                      Py_ssize_t n_x) nogil:
    cdef double r_lo = rho[0]
    cdef double r_hi = rho[0]
    cdef Py_ssize_t k
    for k in range(1, n_x):
        if rho[k] < r_lo:
            r_lo = rho[k]
        if rho[k] > r_hi:
            r_hi = rho[k]
    if r_hi - r_lo < 1e-13:
        return 0.5 * (r_lo + r_hi)
    cdef double a = r_lo - 3.0 * b
    cdef double d = r_hi + 3.0 * b
    cdef double c1 = d - INVPHI * (d - a)
    cdef double c2 = a + INVPHI * (d - a)
    cdef double f1 = _objective(c1, rho, vw, b, n_x)
    cdef double f2 = _objective(c2, rho, vw, b, n_x)
    while d - a > tol:
        if f1 <= f2:
            d = c2
            c2 = c1
            f2 = f1
            c1 = d - INVPHI * (d - a)
            f1 = _objective(c1, rho, vw, b, n_x)
        else:
            a = c1
            c1 = c2
            f1 = f2
            c2 = a + INVPHI * (d - a)
            f2 = _objective(c2, rho, vw, b, n_x)
    cdef double ga = _dobjective(a, rho, vw, b, n_x)
    cdef double gd = _dobjective(d, rho, vw, b, n_x)
    cdef double m, gm
    cdef int it
    if ga < 0.0 < gd:
        for it in range(80):
            m = 0.5 * (a + d)
            gm = _dobjective(m, rho, vw, b, n_x)
            if gm < 0.0:
                a = m
            else:
                d = m
            if d - a < 1e-13 * (1.0 + fabs(m)):
                break
    return 0.5 * (a + d)


def qhat_minimize(rho, vw, double b, double tol=1e-9):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.ascontiguousarray(rho, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(vw, dtype=np.float64)
    return _qhat_one(r, w, b, tol, r.shape[0])


def qhat_curve(s1, Py_ssize_t idx0, Py_ssize_t idx1, vw, double b,
               double s1_floor=1e-8, double tol=1e-9):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s = np.ascontiguousarray(s1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(vw, dtype=np.float64)
    cdef Py_ssize_t n_u = s.shape[0]
    cdef Py_ssize_t n_x = s.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] q = np.empty(n_u)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] row = np.empty(n_x)
    cdef Py_ssize_t j, k
    cdef double r_lo, r_hi
    cdef bint bad = False

    for k in range(n_x):
        if fabs(s[idx1, k]) < s1_floor:
            bad = True
    if bad:
        raise VanishingDenominator(
            f"|s1_hat(1, x)| below {s1_floor:g} at some weight node"
        )
    cdef double[::1] rowv = row
    cdef double[::1] wv = w
    for j in range(n_u):
        r_lo = 1e308
        r_hi = -1e308
        for k in range(n_x):
            row[k] = s[j, k] / s[idx1, k]
            if row[k] < r_lo:
                r_lo = row[k]
            if row[k] > r_hi:
                r_hi = row[k]
        if r_hi - r_lo < 1e-13:
            q[j] = row[0]
        else:
            q[j] = _qhat_one(rowv, wv, b, tol, n_x)
    return q
