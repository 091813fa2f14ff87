"""Shared test utilities: a finite-difference oracle independent of the
autodiff engine (it only ever calls forward evaluations)."""

from __future__ import annotations

import numpy as np

FD_STEP = 1e-5

# Scoreboard lines collected by the acceptance tests; conftest.py replays
# them after the run so they survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def finite_difference(f, arrays, step=FD_STEP):
    """Central-difference gradient of the scalar function f with respect to
    each array in `arrays`. f takes no arguments and must read the arrays
    by reference, so mutating an entry changes what f computes."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            ij = it.multi_index
            orig = a[ij]
            a[ij] = orig + step
            fp = f()
            a[ij] = orig - step
            fm = f()
            a[ij] = orig
            g[ij] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-8):
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=rtol, atol=atol)
