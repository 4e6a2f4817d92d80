import warnings

import numpy as np

from ipucopula.engine import TruncationWarning, simulate, tensor_density


def histogram_agreement(model, seed, count=1_000_000, bins=20, sub=5, k=5.0):
    """Share of histogram cells within ``k`` binomial standard errors of the density mass."""
    u = simulate(model, count, seed=seed)
    counts, _, _ = np.histogram2d(u[:, 0], u[:, 1], bins=bins, range=[[0, 1], [0, 1]])
    m = bins * sub
    mid = (np.arange(m) + 0.5) / m
    with warnings.catch_warnings():
        # the pole cell at (1, 1) is allowed to be imprecise
        warnings.simplefilter("ignore", TruncationWarning)
        vals, _ = tensor_density(model, mid, mid)
    prob = vals.reshape(bins, sub, bins, sub).mean(axis=(1, 3)) / bins**2
    expected = count * prob
    se = np.sqrt(count * prob * (1 - prob))
    return float(np.mean(np.abs(counts - expected) <= k * se))


# (label, passed, detail) for the acceptance summary
VERDICTS = []


def verdict(label, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}"
    print(line)
    VERDICTS.append(line)
    return line
