"""Independent oracles used by the test suite.

Everything here is computed from scratch (FFT / closed forms / direct
enumeration), never through the package's sparse operators, so the tests
compare two independent routes to the same numbers.
"""

import numpy as np


def mode_field(m, k, l, n_squares=1):
    """exp(2 pi i (k x + l y)) sampled at the cell centers of an m x m grid,
    replicated across squares (used on torus covers where squares are glued
    by translations in a single cycle only for n_squares=1)."""
    i = np.arange(m)
    x = (i + 0.5) / m
    col = np.exp(2j * np.pi * k * x)
    row = np.exp(2j * np.pi * l * x)
    square = (row[:, None] * col[None, :]).reshape(-1)  # index j*m + i
    return np.tile(square, n_squares)


def symbol(m, k):
    """Eigenvalue of the central-difference derivative on mode k is
    1j * symbol(m, k)."""
    return m * np.sin(2.0 * np.pi * k / m)


def mode_frequencies(m):
    """Representative frequencies -(m-1)/2 .. (m-1)/2 for odd m."""
    half = (m - 1) // 2
    return np.arange(-half, half + 1)


def mode_coefficients(m, u):
    """Coefficients c[k, l] of u = sum c[k,l] mode_field(m, k, l) on the torus.

    Index order matches mode_frequencies; computed by FFT with the half-cell
    phase shift, independent of the package's inner products.
    """
    a = np.asarray(u, dtype=complex).reshape(m, m)  # a[j, i]
    F = np.fft.fft2(a) / (m * m)  # F[l, k] = (1/m^2) sum a e^{-2 pi i (k i + l j)/m}
    freqs = mode_frequencies(m)
    phase = np.exp(-1j * np.pi * freqs / m)  # absorbs the half-cell offset
    jj = np.ix_(freqs % m, freqs % m)
    return F[jj] * np.outer(phase, phase)


def field_from_coefficients(m, coeff):
    freqs = mode_frequencies(m)
    u = np.zeros(m * m, dtype=complex)
    for a, k in enumerate(freqs):
        for b, l in enumerate(freqs):
            if coeff[b, a] != 0:
                u += coeff[b, a] * mode_field(m, k, l)
    return u


def torus_symbol_value(m, k, l, theta, sigma, cos_scaled=False):
    """Symbol of cos(theta) S + sin(theta) T + i twist on mode (k, l)."""
    twist = sigma * np.cos(theta) if cos_scaled else sigma
    return 1j * (symbol(m, k) * np.cos(theta) + symbol(m, l) * np.sin(theta) + twist)


def oracle_solve(m, f, theta, sigma, cos_scaled=False, resonance_tol=1e-12):
    """Solve (cos(theta) S + sin(theta) T + i twist) u = f per Fourier mode on
    the torus, zeroing resonant modes.  Returns (u, obstructed_mass)."""
    coeff = mode_coefficients(m, f)
    freqs = mode_frequencies(m)
    out = np.zeros_like(coeff)
    obstructed = 0.0
    for a, k in enumerate(freqs):
        for b, l in enumerate(freqs):
            d = torus_symbol_value(m, k, l, theta, sigma, cos_scaled)
            c = coeff[b, a]
            if abs(d) <= resonance_tol:
                obstructed += abs(c) ** 2
            else:
                out[b, a] = c / d
    return field_from_coefficients(m, out), np.sqrt(obstructed)


def dirichlet_eigenvalues(m):
    """All eigenvalues of the discrete Dirichlet form on the torus, sorted."""
    freqs = mode_frequencies(m)
    sx = symbol(m, freqs)
    vals = (sx[:, None] ** 2 + sx[None, :] ** 2).reshape(-1)
    return np.sort(vals)


def count_dirichlet_eigs(m, lam, circumference=1):
    """Direct count of torus-grid Dirichlet eigenvalues <= lam.

    circumference=c counts the horizontal c-cover: a ring of c*m cells of
    spacing 1/m, so the horizontal symbols are m*sin(pi*k*2/(c*m)) over a
    full residue system k mod c*m.  For even rings this includes the exact
    alternating null mode.
    """
    mm = m * circumference
    kk = np.arange(mm)
    sx = m * np.sin(2.0 * np.pi * kk / mm)
    ll = np.arange(m)
    sy = m * np.sin(2.0 * np.pi * ll / m)
    grid = sx[:, None] ** 2 + sy[None, :] ** 2
    return int(np.count_nonzero(grid <= lam))


def weighted_norm_mode(m, k, l, order):
    """Closed-form integer weighted norm of a unit-L2 single mode."""
    sx2 = symbol(m, k) ** 2
    sy2 = symbol(m, l) ** 2
    total = 0.0
    for i in range(order + 1):
        for j in range(order + 1 - i):
            total += sx2**i * sy2**j
    return np.sqrt(total)
