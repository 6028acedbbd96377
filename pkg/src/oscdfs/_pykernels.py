"""Pure-Python/numpy versions of the hot loops (fallback for the compiled core)."""
import numpy as np


def volterra_trapezoid(kernel, h):
    """Solve u' = -int_0^t K(t - s) u(s) ds, u(0) = 1, on a uniform grid.

    ``kernel[j]`` holds K(j h) for j = 0..n. Memory integral by the trapezoidal
    rule, time step by the (linearly implicit) trapezoidal rule.
    """
    kernel = np.ascontiguousarray(kernel, dtype=complex)
    n = kernel.shape[0]
    u = np.empty(n, dtype=complex)
    u[0] = 1.0
    k0 = kernel[0]
    denom = 1.0 + 0.25 * h * h * k0
    mem = 0.0j  # I_n, memory integral at the current step
    for m in range(n - 1):
        # known part of I_{m+1}: all samples except the implicit u_{m+1}
        s = 0.5 * kernel[m + 1] * u[0]
        if m > 0:
            s += np.dot(kernel[m:0:-1], u[1:m + 1])
        s *= h
        u[m + 1] = (u[m] - 0.5 * h * (mem + s)) / denom
        mem = s + 0.5 * h * k0 * u[m + 1]
    return u


def rk4_linear(step, rho0, nsteps, store_every, d):
    """Iterate vec(rho) <- step @ vec(rho) with Hermitian symmetrization after each step.

    Returns the stored samples (every ``store_every`` steps, first and last
    included) as a (nstore, d*d) array.
    """
    step = np.ascontiguousarray(step, dtype=complex)
    x = np.array(rho0, dtype=complex)
    nstore = nsteps // store_every + 1
    if nsteps % store_every:
        nstore += 1
    out = np.empty((nstore, d * d), dtype=complex)
    out[0] = x
    k = 1
    for n in range(1, nsteps + 1):
        x = step @ x
        m = x.reshape(d, d)
        x = (0.5 * (m + m.conj().T)).ravel()
        if n % store_every == 0 or n == nsteps:
            out[k] = x
            k += 1
    return out
