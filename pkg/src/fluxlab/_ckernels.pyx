# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil, right-hand side and RK4 kernels.

Signatures mirror ``fluxlab._pykernels``; ``fluxlab.kernels`` picks one.
Complex arrays are processed as interleaved (re, im) doubles so that all
arithmetic stays real.
"""
import numpy as np

cdef double C0 = -2.5, C1 = 4.0 / 3.0, C2 = -1.0 / 12.0


cdef inline Py_ssize_t _mirror(Py_ssize_t j, Py_ssize_t n) noexcept nogil:
    if j < 0:
        return -j
    if j > n - 1:
        return 2 * (n - 1) - j
    return j


cdef void _lap(const double[::1] f, double[::1] out, Py_ssize_t n, double dx,
               int order) noexcept nogil:
    # f, out: interleaved complex of n points
    cdef Py_ssize_t i, c, a, b, a2, b2
    cdef double h2 = 1.0 / (dx * dx)
    if order == 2:
        for c in range(2):
            out[c] = 2.0 * (f[2 + c] - f[c]) * h2
            out[2 * (n - 1) + c] = 2.0 * (f[2 * (n - 2) + c] - f[2 * (n - 1) + c]) * h2
        for i in range(1, n - 1):
            for c in range(2):
                out[2 * i + c] = (f[2 * i - 2 + c] - 2.0 * f[2 * i + c] + f[2 * i + 2 + c]) * h2
    else:
        for i in range(n):
            a = _mirror(i - 1, n)
            b = _mirror(i + 1, n)
            a2 = _mirror(i - 2, n)
            b2 = _mirror(i + 2, n)
            for c in range(2):
                out[2 * i + c] = (C2 * (f[2 * a2 + c] + f[2 * b2 + c])
                                  + C1 * (f[2 * a + c] + f[2 * b + c])
                                  + C0 * f[2 * i + c]) * h2


cdef void _rhs(const double[::1] p1, const double[::1] p2, const double[::1] pot,
               Py_ssize_t n, double rho0, double k, double dx, int order,
               double[::1] l1, double[::1] l2, double[::1] o1, double[::1] o2) noexcept nogil:
    cdef Py_ssize_t i
    cdef double u1, w1, u2, w2, q1, q2, hr, hi
    _lap(p1, l1, n, dx, order)
    _lap(p2, l2, n, dx, order)
    for i in range(n):
        u1 = p1[2 * i]
        w1 = p1[2 * i + 1]
        u2 = p2[2 * i]
        w2 = p2[2 * i + 1]
        q1 = u1 * u1 + w1 * w1 - rho0 + pot[i]
        q2 = u2 * u2 + w2 * w2 - rho0 + pot[i]
        # h = -lap/2 + q psi - k other ; d/dt psi = -i h
        hr = -0.5 * l1[2 * i] + q1 * u1 - k * u2
        hi = -0.5 * l1[2 * i + 1] + q1 * w1 - k * w2
        o1[2 * i] = hi
        o1[2 * i + 1] = -hr
        hr = -0.5 * l2[2 * i] + q2 * u2 - k * u1
        hi = -0.5 * l2[2 * i + 1] + q2 * w2 - k * w1
        o2[2 * i] = hi
        o2[2 * i + 1] = -hr


def _flat(a):
    return np.ascontiguousarray(a, dtype=np.complex128).view(np.float64)


def laplacian(f, double dx, int order):
    cdef double[::1] fv = _flat(f)
    cdef Py_ssize_t n = fv.shape[0] // 2
    out = np.empty(n, dtype=np.complex128)
    cdef double[::1] ov = out.view(np.float64)
    with nogil:
        _lap(fv, ov, n, dx, order)
    return out


def gpe_rhs(psi1, psi2, pot, double rho0, double k, double dx, int order):
    cdef double[::1] p1 = _flat(psi1)
    cdef double[::1] p2 = _flat(psi2)
    cdef double[::1] v = np.ascontiguousarray(pot, dtype=np.float64)
    cdef Py_ssize_t n = p1.shape[0] // 2
    cdef double[::1] l1 = np.empty(2 * n)
    cdef double[::1] l2 = np.empty(2 * n)
    o1 = np.empty(n, dtype=np.complex128)
    o2 = np.empty(n, dtype=np.complex128)
    cdef double[::1] o1v = o1.view(np.float64)
    cdef double[::1] o2v = o2.view(np.float64)
    with nogil:
        _rhs(p1, p2, v, n, rho0, k, dx, order, l1, l2, o1v, o2v)
    return o1, o2


def rk4_steps(psi1, psi2, pot, double rho0, double k, double dx, int order,
              double dt, Py_ssize_t nsteps):
    """Advance ``nsteps`` classical RK4 steps; returns new arrays."""
    y1_arr = np.array(psi1, dtype=np.complex128, copy=True)
    y2_arr = np.array(psi2, dtype=np.complex128, copy=True)
    cdef double[::1] y1 = y1_arr.view(np.float64)
    cdef double[::1] y2 = y2_arr.view(np.float64)
    cdef Py_ssize_t n = y1.shape[0] // 2
    cdef Py_ssize_t m = 2 * n
    cdef double[::1] v = np.ascontiguousarray(pot, dtype=np.float64)
    # stage slopes k1..k4 per component, stage fields, laplacian scratch
    cdef double[::1] a1 = np.empty(m), a2 = np.empty(m)
    cdef double[::1] b1 = np.empty(m), b2 = np.empty(m)
    cdef double[::1] c1 = np.empty(m), c2 = np.empty(m)
    cdef double[::1] d1 = np.empty(m), d2 = np.empty(m)
    cdef double[::1] s1 = np.empty(m), s2 = np.empty(m)
    cdef double[::1] l1 = np.empty(m), l2 = np.empty(m)
    cdef Py_ssize_t s, i
    cdef double h = 0.5 * dt, d6 = dt / 6.0
    with nogil:
        for s in range(nsteps):
            _rhs(y1, y2, v, n, rho0, k, dx, order, l1, l2, a1, a2)
            for i in range(m):
                s1[i] = y1[i] + h * a1[i]
                s2[i] = y2[i] + h * a2[i]
            _rhs(s1, s2, v, n, rho0, k, dx, order, l1, l2, b1, b2)
            for i in range(m):
                s1[i] = y1[i] + h * b1[i]
                s2[i] = y2[i] + h * b2[i]
            _rhs(s1, s2, v, n, rho0, k, dx, order, l1, l2, c1, c2)
            for i in range(m):
                s1[i] = y1[i] + dt * c1[i]
                s2[i] = y2[i] + dt * c2[i]
            _rhs(s1, s2, v, n, rho0, k, dx, order, l1, l2, d1, d2)
            for i in range(m):
                y1[i] += d6 * (a1[i] + 2.0 * b1[i] + 2.0 * c1[i] + d1[i])
                y2[i] += d6 * (a2[i] + 2.0 * b2[i] + 2.0 * c2[i] + d2[i])
    return y1_arr, y2_arr
