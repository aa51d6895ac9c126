"""Hot time-stepping kernels: JIT-compiled with numba, with a pure
numpy/scipy fallback selected by the environment flag
THRESHOLD_LAB_NO_NUMBA=1.

One Strang step of i u_t + Delta u + |u|^{p-1} u = 0 is:

    half-step exact nonlinear phase   u <- u * exp(i dt/2 |u|^{p-1})
    full Crank-Nicolson linear step   (I - i dt/2 A) u_new = (I + i dt/2 A) u
    half-step exact nonlinear phase

where A is the (real, pentadiagonal) discrete radial Laplacian.  The linear
solve is a pentadiagonal LU without pivoting; the matrix I - i dt/2 A is
strongly diagonally dominant in modulus for the stencils used here, and the
test suite cross-checks the kernel against LAPACK's pivoted banded solver.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["USE_NUMBA", "extract_bands", "strang_step", "strang_run", "penta_solve"]

USE_NUMBA = os.environ.get("THRESHOLD_LAB_NO_NUMBA", "") != "1"
if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def extract_bands(A) -> tuple[np.ndarray, ...]:
    """Extract the five bands of a pentadiagonal sparse matrix.

    Returns (dl2, dl1, d, du1, du2), each aligned by row index: dl2[i] = A[i, i-2],
    du1[i] = A[i, i+1], etc., padded with zeros where out of range.
    """
    M = A.shape[0]
    out = []
    for k in (-2, -1, 0, 1, 2):
        band = np.zeros(M)
        diag = A.diagonal(k)
        if k < 0:
            band[-k:] = diag
        elif k > 0:
            band[: M - k] = diag
        else:
            band[:] = diag
        out.append(band)
    return tuple(out)


def _penta_solve_py(dl2, dl1, d, du1, du2, b):
    n = d.shape[0]
    c = d.copy()
    e = du1.copy()
    f = du2.copy()
    a1 = dl1.copy()
    a2 = dl2.copy()
    x = b.copy()
    for i in range(1, n):
        m = a1[i] / c[i - 1]
        c[i] = c[i] - m * e[i - 1]
        e[i] = e[i] - m * f[i - 1]
        x[i] = x[i] - m * x[i - 1]
        if i + 1 < n:
            m2 = a2[i + 1] / c[i - 1]
            a1[i + 1] = a1[i + 1] - m2 * e[i - 1]
            c[i + 1] = c[i + 1] - m2 * f[i - 1]
            x[i + 1] = x[i + 1] - m2 * x[i - 1]
    x[n - 1] = x[n - 1] / c[n - 1]
    x[n - 2] = (x[n - 2] - e[n - 2] * x[n - 1]) / c[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - e[i] * x[i + 1] - f[i] * x[i + 2]) / c[i]
    return x


def _penta_matvec_py(dl2, dl1, d, du1, du2, u):
    n = d.shape[0]
    out = d * u
    out[1:] += dl1[1:] * u[:-1]
    out[2:] += dl2[2:] * u[:-2]
    out[:-1] += du1[:-1] * u[1:]
    out[:-2] += du2[:-2] * u[2:]
    return out


def _strang_step_py(u, dl2, dl1, d, du1, du2, dt, p):
    half = (p - 1) / 2
    amp = (u.real**2 + u.imag**2) ** half
    u = u * np.exp(0.5j * dt * amp)
    alpha = 0.5j * dt
    rhs = u + alpha * _penta_matvec_py(dl2, dl1, d, du1, du2, u)
    u = _penta_solve_py(
        -alpha * dl2, -alpha * dl1, 1.0 - alpha * d, -alpha * du1, -alpha * du2, rhs
    )
    amp = (u.real**2 + u.imag**2) ** half
    return u * np.exp(0.5j * dt * amp)


if USE_NUMBA:
    import numba

    @numba.njit(cache=True)
    def _strang_step_nb(u, dl2, dl1, d, du1, du2, dt, p):  # pragma: no cover
        n = u.shape[0]
        half = (p - 1) / 2
        alpha = 0.5j * dt
        v = np.empty(n, dtype=np.complex128)
        for i in range(n):
            amp = (u[i].real * u[i].real + u[i].imag * u[i].imag) ** half
            v[i] = u[i] * np.exp(0.5j * dt * amp)
        # rhs = (I + alpha A) v
        rhs = np.empty(n, dtype=np.complex128)
        for i in range(n):
            s = d[i] * v[i]
            if i >= 1:
                s += dl1[i] * v[i - 1]
            if i >= 2:
                s += dl2[i] * v[i - 2]
            if i + 1 < n:
                s += du1[i] * v[i + 1]
            if i + 2 < n:
                s += du2[i] * v[i + 2]
            rhs[i] = v[i] + alpha * s
        # factor/solve (I - alpha A) x = rhs, pentadiagonal, no pivoting
        c = np.empty(n, dtype=np.complex128)
        e = np.empty(n, dtype=np.complex128)
        f = np.empty(n, dtype=np.complex128)
        a1 = np.empty(n, dtype=np.complex128)
        a2 = np.empty(n, dtype=np.complex128)
        for i in range(n):
            c[i] = 1.0 - alpha * d[i]
            e[i] = -alpha * du1[i]
            f[i] = -alpha * du2[i]
            a1[i] = -alpha * dl1[i]
            a2[i] = -alpha * dl2[i]
        x = rhs
        for i in range(1, n):
            m = a1[i] / c[i - 1]
            c[i] -= m * e[i - 1]
            e[i] -= m * f[i - 1]
            x[i] -= m * x[i - 1]
            if i + 1 < n:
                m2 = a2[i + 1] / c[i - 1]
                a1[i + 1] -= m2 * e[i - 1]
                c[i + 1] -= m2 * f[i - 1]
                x[i + 1] -= m2 * x[i - 1]
        x[n - 1] = x[n - 1] / c[n - 1]
        x[n - 2] = (x[n - 2] - e[n - 2] * x[n - 1]) / c[n - 2]
        for i in range(n - 3, -1, -1):
            x[i] = (x[i] - e[i] * x[i + 1] - f[i] * x[i + 2]) / c[i]
        for i in range(n):
            amp = (x[i].real * x[i].real + x[i].imag * x[i].imag) ** half
            x[i] = x[i] * np.exp(0.5j * dt * amp)
        return x


# substep weights of the symmetric compositions of the Strang step:
# order 2 is Strang itself; order 4 is the triple-jump (Yoshida) composition
_W4_1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
COMPOSITION_WEIGHTS = {
    2: np.array([1.0]),
    4: np.array([_W4_1, 1.0 - 2.0 * _W4_1, _W4_1]),
}


def _comp_run_py(u, dl2, dl1, d, du1, du2, dt, p, nsteps, damp, ws):
    half = (p - 1) / 2
    nsub = len(ws)
    use_damp = damp is not None
    decay = np.exp(-damp) if use_damp else None
    # phase fraction applied before substep j (fusing the trailing half of the
    # previous substep with the leading half of this one; exact, since the
    # phase step leaves |u| invariant)
    for n in range(nsteps):
        for j in range(nsub):
            if n == 0 and j == 0:
                frac = 0.5 * ws[0]
            elif j == 0:
                frac = 0.5 * (ws[-1] + ws[0])
            else:
                frac = 0.5 * (ws[j - 1] + ws[j])
            amp = (u.real**2 + u.imag**2) ** half
            u = u * np.exp(1j * frac * dt * amp)
            alpha = 0.5j * ws[j] * dt
            rhs = u + alpha * _penta_matvec_py(dl2, dl1, d, du1, du2, u)
            u = _penta_solve_py(
                -alpha * dl2, -alpha * dl1, 1.0 - alpha * d,
                -alpha * du1, -alpha * du2, rhs,
            )
        if use_damp:
            u = u * decay
    amp = (u.real**2 + u.imag**2) ** half
    return u * np.exp(0.5j * ws[-1] * dt * amp)


if USE_NUMBA:

    @numba.njit(cache=True)
    def _comp_run_nb(u, dl2, dl1, d, du1, du2, dt, p, nsteps, damp, use_damp, ws):  # pragma: no cover
        n = u.shape[0]
        nsub = ws.shape[0]
        half = (p - 1) / 2
        u = u.copy()
        x = np.empty(n, dtype=np.complex128)
        # factor (I - alpha_j A) once per substep weight: dt is fixed for the
        # whole run, so the elimination multipliers and pivots are reused
        e = np.empty((nsub, n), dtype=np.complex128)
        f = np.empty((nsub, n), dtype=np.complex128)
        m1 = np.zeros((nsub, n), dtype=np.complex128)
        m2 = np.zeros((nsub, n), dtype=np.complex128)
        cinv = np.empty((nsub, n), dtype=np.complex128)
        alphas = np.empty(nsub, dtype=np.complex128)
        fracs = np.empty(nsub, dtype=np.float64)
        c = np.empty(n, dtype=np.complex128)
        a1 = np.empty(n, dtype=np.complex128)
        a2 = np.empty(n, dtype=np.complex128)
        for j in range(nsub):
            alpha = 0.5j * ws[j] * dt
            alphas[j] = alpha
            for i in range(n):
                c[i] = 1.0 - alpha * d[i]
                e[j, i] = -alpha * du1[i]
                f[j, i] = -alpha * du2[i]
                a1[i] = -alpha * dl1[i]
                a2[i] = -alpha * dl2[i]
            for i in range(1, n):
                m1[j, i] = a1[i] / c[i - 1]
                c[i] -= m1[j, i] * e[j, i - 1]
                e[j, i] -= m1[j, i] * f[j, i - 1]
                if i + 1 < n:
                    m2[j, i + 1] = a2[i + 1] / c[i - 1]
                    a1[i + 1] -= m2[j, i + 1] * e[j, i - 1]
                    c[i + 1] -= m2[j, i + 1] * f[j, i - 1]
            for i in range(n):
                cinv[j, i] = 1.0 / c[i]
            # fused phase fraction applied before substep j
            if j == 0:
                fracs[j] = 0.5 * (ws[nsub - 1] + ws[0])
            else:
                fracs[j] = 0.5 * (ws[j - 1] + ws[j])
        for stepi in range(nsteps):
            for j in range(nsub):
                frac = 0.5 * ws[0] if (stepi == 0 and j == 0) else fracs[j]
                alpha = alphas[j]
                for i in range(n):
                    amp = (u[i].real * u[i].real + u[i].imag * u[i].imag) ** half
                    u[i] = u[i] * np.exp(1j * (frac * dt) * amp)
                for i in range(n):
                    s = d[i] * u[i]
                    if i >= 1:
                        s += dl1[i] * u[i - 1]
                    if i >= 2:
                        s += dl2[i] * u[i - 2]
                    if i + 1 < n:
                        s += du1[i] * u[i + 1]
                    if i + 2 < n:
                        s += du2[i] * u[i + 2]
                    x[i] = u[i] + alpha * s
                for i in range(1, n):
                    x[i] -= m1[j, i] * x[i - 1]
                    if i + 1 < n:
                        x[i + 1] -= m2[j, i + 1] * x[i - 1]
                x[n - 1] = x[n - 1] * cinv[j, n - 1]
                x[n - 2] = (x[n - 2] - e[j, n - 2] * x[n - 1]) * cinv[j, n - 2]
                for i in range(n - 3, -1, -1):
                    x[i] = (x[i] - e[j, i] * x[i + 1] - f[j, i] * x[i + 2]) * cinv[j, i]
                for i in range(n):
                    u[i] = x[i]
            if use_damp:
                for i in range(n):
                    u[i] = u[i] * np.exp(-damp[i])
        for i in range(n):
            amp = (u[i].real * u[i].real + u[i].imag * u[i].imag) ** half
            u[i] = u[i] * np.exp(0.5j * (ws[nsub - 1] * dt) * amp)
        return u


def strang_run(u, bands, dt: float, p: float, nsteps: int, damp=None,
               order: int = 2) -> np.ndarray:
    """Advance nsteps splitting steps at fixed dt, fusing interior phase
    half-steps (exact: the nonlinear phase leaves |u| invariant).

    order 2 is the Strang step itself; order 4 composes three Strang substeps
    with the triple-jump weights.  damp: optional real array of per-step
    absorption exponents (sponge); applied as u *= exp(-damp) once per step.
    """
    dl2, dl1, d, du1, du2 = bands
    ws = COMPOSITION_WEIGHTS[order]
    if USE_NUMBA:
        zero = damp if damp is not None else np.zeros(1)
        return _comp_run_nb(
            np.ascontiguousarray(u, dtype=np.complex128),
            dl2, dl1, d, du1, du2, dt, p, nsteps,
            np.ascontiguousarray(zero), damp is not None, ws,
        )
    return _comp_run_py(np.asarray(u, complex), dl2, dl1, d, du1, du2, dt, p, nsteps, damp, ws)


def penta_solve(dl2, dl1, d, du1, du2, b):
    """Solve the pentadiagonal system given by row-aligned bands."""
    return _penta_solve_py(
        np.asarray(dl2, complex), np.asarray(dl1, complex), np.asarray(d, complex),
        np.asarray(du1, complex), np.asarray(du2, complex), np.asarray(b, complex),
    )


def strang_step(u, bands, dt: float, p: float) -> np.ndarray:
    """One Strang step; dispatches to the JIT kernel when available."""
    dl2, dl1, d, du1, du2 = bands
    if USE_NUMBA:
        return _strang_step_nb(
            np.ascontiguousarray(u, dtype=np.complex128),
            dl2, dl1, d, du1, du2, dt, p,
        )
    return _strang_step_py(np.asarray(u, complex), dl2, dl1, d, du1, du2, dt, p)
