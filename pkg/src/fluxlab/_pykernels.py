"""Pure NumPy kernels; same call signatures as the compiled ``_ckernels``."""
import numpy as np

_FIVE = np.array([-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0])


def laplacian(f, dx, order):
    f = np.asarray(f, dtype=np.complex128)
    m = 1 if order == 2 else 2
    # mirror ghost points: f[-j] = f[j], f[n-1+j] = f[n-1-j]
    g = np.concatenate([f[m:0:-1], f, f[-2:-2 - m:-1]])
    if order == 2:
        out = g[:-2] - 2.0 * g[1:-1] + g[2:]
    else:
        out = (_FIVE[0] * (g[:-4] + g[4:]) + _FIVE[1] * (g[1:-3] + g[3:-1])
               + _FIVE[2] * g[2:-2])
    return out / (dx * dx)


def gpe_rhs(psi1, psi2, pot, rho0, k, dx, order):
    h1 = (-0.5 * laplacian(psi1, dx, order)
          + (psi1.real ** 2 + psi1.imag ** 2 - rho0 + pot) * psi1 - k * psi2)
    h2 = (-0.5 * laplacian(psi2, dx, order)
          + (psi2.real ** 2 + psi2.imag ** 2 - rho0 + pot) * psi2 - k * psi1)
    return -1j * h1, -1j * h2


def rk4_steps(psi1, psi2, pot, rho0, k, dx, order, dt, nsteps):
    y1 = np.array(psi1, dtype=np.complex128, copy=True)
    y2 = np.array(psi2, dtype=np.complex128, copy=True)
    args = (pot, rho0, k, dx, order)
    h = 0.5 * dt
    for _ in range(nsteps):
        a1, a2 = gpe_rhs(y1, y2, *args)
        b1, b2 = gpe_rhs(y1 + h * a1, y2 + h * a2, *args)
        c1, c2 = gpe_rhs(y1 + h * b1, y2 + h * b2, *args)
        d1, d2 = gpe_rhs(y1 + dt * c1, y2 + dt * c2, *args)
        y1 += dt / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        y2 += dt / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
    return y1, y2
