"""Independent reference computations for the test suite.

Everything here is deliberately brute force and shares no code with
the package internals: overlap-determinant holonomy signs, an
entrywise antilinear commutant solve, literal spectra, and closed-form
samples.  When a package result and a reference disagree, the package
is wrong.
"""

import numpy as np


def wilson_sign(sampler, lower, upper, n_samples=10_000):
    """Holonomy sign from raw eigenframes at a dense uniform grid.

    sampler(t) must return the loop operator; frames are taken straight
    from eigh in whatever gauge LAPACK picks.  The product of overlap
    determinants det(V_i^T V_{i+1}) around the loop is gauge invariant,
    and so is its sign.
    """
    def frame(t):
        values, vectors = np.linalg.eigh(sampler(t))
        return vectors[:, (values > lower) & (values < upper)]

    frames = [frame(j / n_samples) for j in range(n_samples)]
    frames.append(frames[0])
    sign = 1.0
    for a, b in zip(frames, frames[1:]):
        d = np.linalg.det(a.T @ b)
        if abs(d) < 1e-3:
            raise RuntimeError("overlap nearly singular; sampling too coarse")
        sign *= np.sign(d)
    return int(sign)


def brute_force_structure_map(generators):
    """Solve C conj(g) = g C for all generators g, entry by entry.

    Returns a unit-Frobenius-norm kernel element and the dimension of
    the kernel of the stacked real system.  No vectorization tricks:
    the constraint matrix is filled in four nested loops so it cannot
    share a bug with any production code path.
    """
    n = generators[0].shape[0]
    rows = []
    for g in generators:
        gc = np.conj(g)
        # constraint: sum_k C[i,k] gc[k,j] - g[i,k] C[k,j] = 0
        for i in range(n):
            for j in range(n):
                row = np.zeros(n * n, dtype=complex)
                for k in range(n):
                    row[i * n + k] += gc[k, j]
                    row[k * n + j] -= g[i, k]
                rows.append(row)
    a = np.array(rows)
    # realify: unknown c = x + iy, equation a (x + iy) = 0
    top = np.hstack([a.real, -a.imag])
    bot = np.hstack([a.imag, a.real])
    system = np.vstack([top, bot])
    _, svals, vt = np.linalg.svd(system)
    null_dim = int(np.sum(svals < 1e-10 * svals[0]))
    sol = vt[-1]
    c = (sol[: n * n] + 1j * sol[n * n:]).reshape(n, n)
    return c / np.linalg.norm(c), null_dim


def structure_epsilon(c):
    """Sign of J^2 for J(v) = C conj(v), after unit rescale."""
    n = c.shape[0]
    square = c @ np.conj(c)
    mu = np.trace(square).real / n
    if abs(mu) < 1e-10:
        raise RuntimeError("J^2 is not a real scalar")
    return 1 if mu > 0 else -1


def halfturn_sample(d0, t):
    """D(t) for the 2x2-block half-turn conjugation, by direct product."""
    n = d0.shape[0]
    blocks = n // 2
    a = np.pi * t
    r2 = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    rho = np.kron(np.eye(blocks), r2)
    return rho @ d0 @ rho.T


def conical_gap(r):
    """Eigenvalue gap of r * [[cos, sin], [sin, -cos]]: exactly 2r."""
    return 2.0 * r


# literal circle spectra at truncation 3
CIRCLE_HALF_SPECTRUM = [-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]
CIRCLE_ZERO_SPECTRUM = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
