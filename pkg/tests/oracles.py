"""Independent reference computations shared by unit and acceptance tests."""

import math

import numpy as np
from scipy.special import logsumexp

from failbench.study_or import ContingencyTable2x2, has_sampling_zero


def grid_oracle(table, which, step=1e-4):
    """Brute-force log-psi search with exact integer binomial weights.

    Fisher: argmax of the conditional log-likelihood on the grid.
    Midp: grid point where P(N11 > n11) + P(N11 = n11)/2 is closest to 1/2.
    """
    n11, n10, n01, n00 = (int(c) for c in table.cells)
    m1, m0, t = n11 + n10, n01 + n00, n11 + n01
    ks = np.arange(max(0, t - m0), min(m1, t) + 1)
    logw = np.array([math.log(math.comb(m1, k) * math.comb(m0, t - k)) for k in ks])
    grid = np.arange(-10.0, 10.0 + step / 2, step)
    lw = logw[None, :] + grid[:, None] * ks[None, :]
    if which == "Fisher":
        loglik = n11 * grid - logsumexp(lw, axis=1)
        return grid[int(np.argmax(loglik))]
    p = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
    i = n11 - ks[0]
    upper = p[:, i + 1:].sum(axis=1) + 0.5 * p[:, i]
    return grid[int(np.argmin(np.abs(upper - 0.5)))]


def random_zero_free_tables(n, seed, n_obs=50):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        c = rng.multinomial(n_obs, rng.dirichlet(np.ones(4)))
        tab = ContingencyTable2x2(*map(int, c))
        if not has_sampling_zero(tab):
            out.append(tab)
    return out
