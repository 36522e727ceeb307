"""Pure-Python Jacobi kernels, used when the compiled extension is absent.

Each rotation is applied with numpy row/column slices, so a sweep costs
O(n^2) Python-level iterations. Fine up to a few hundred rows.
"""
import math

import numpy as np


def _rotation(app, aqq, apq):
    g = abs(apq)
    ph = apq / g
    theta = (aqq - app) / (2.0 * g)
    if abs(theta) > 1e150:
        t = 0.5 / theta
    elif theta >= 0.0:
        t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
    else:
        t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(1.0 + t * t)
    return c, t * c, t, ph


def jacobi_eigh(a_in, max_sweeps=100):
    a = np.array(a_in, dtype=np.complex128, copy=True)
    n = a.shape[0]
    q = np.eye(n, dtype=np.complex128)
    a[np.diag_indices(n)] = a.diagonal().real
    frob = float(np.linalg.norm(a))
    converged = n <= 1
    sweep = 0
    while not converged and sweep < max_sweeps:
        sweep += 1
        rotations = 0
        for p in range(n - 1):
            for r in range(p + 1, n):
                apq = a[p, r]
                g = abs(apq)
                app = a[p, p].real
                aqq = a[r, r].real
                if g <= 1e-30 * frob or g <= 1e-18 * math.sqrt(abs(app * aqq)):
                    continue
                rotations += 1
                c, s, t, ph = _rotation(app, aqq, apq)
                phc = ph.conjugate()
                x = a[:, p].copy()
                y = a[:, r]
                a[:, p] = c * x - s * phc * y
                a[:, r] = s * x + c * phc * y
                x = a[p, :].copy()
                y = a[r, :]
                a[p, :] = c * x - s * ph * y
                a[r, :] = s * x + c * ph * y
                a[p, r] = a[r, p] = 0.0
                a[p, p] = app - t * g
                a[r, r] = aqq + t * g
                x = q[:, p].copy()
                y = q[:, r]
                q[:, p] = c * x - s * phc * y
                q[:, r] = s * x + c * phc * y
        if rotations == 0:
            converged = True
    return a.diagonal().real.copy(), q, sweep, converged


def jacobi_svd(k_in, max_sweeps=100):
    u = np.array(k_in, dtype=np.complex128, copy=True)
    n = u.shape[1]
    converged = n <= 1
    sweep = 0
    while not converged and sweep < max_sweeps:
        sweep += 1
        rotations = 0
        for p in range(n - 1):
            for r in range(p + 1, n):
                up = u[:, p]
                ur = u[:, r]
                alpha = float(np.vdot(up, up).real)
                beta = float(np.vdot(ur, ur).real)
                gam = complex(np.vdot(up, ur))
                g = abs(gam)
                if g == 0.0 or g <= 1e-15 * math.sqrt(alpha * beta):
                    continue
                rotations += 1
                c, s, _, ph = _rotation(alpha, beta, gam)
                phc = ph.conjugate()
                x = up.copy()
                u[:, p] = c * x - s * phc * ur
                u[:, r] = s * x + c * phc * u[:, r]
        if rotations == 0:
            converged = True
    return np.sqrt(np.sum(np.abs(u) ** 2, axis=0)), sweep, converged
