"""Independent reference implementations used to pin expected values.

Everything here is deliberately brute force: path enumeration, straight
line arithmetic, no shared code with the package internals.
"""

import itertools

import numpy as np


def collapse(path, blank):
    out = []
    prev = None
    for s in path:
        if s != blank and s != prev:
            out.append(s)
        prev = s
    return tuple(out)


def ctc_nll_enumerate(log_probs, labels, blank):
    """-log P(labels) by summing every alignment path of length T."""
    t_len, n_sym = log_probs.shape
    target = tuple(labels)
    total = -np.inf
    for path in itertools.product(range(n_sym), repeat=t_len):
        if collapse(path, blank) == target:
            total = np.logaddexp(total, sum(log_probs[t, s] for t, s in enumerate(path)))
    return float(-total)


def ctc_prefix_mass_enumerate(log_probs, prefix, blank):
    """log P(label sequence starts with prefix), by path enumeration."""
    t_len, n_sym = log_probs.shape
    prefix = tuple(prefix)
    total = -np.inf
    for path in itertools.product(range(n_sym), repeat=t_len):
        lab = collapse(path, blank)
        if lab[: len(prefix)] == prefix:
            total = np.logaddexp(total, sum(log_probs[t, s] for t, s in enumerate(path)))
    return float(total)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def lstm_step_reference(x, h_prev, c_prev, w, b):
    """One LSTM step from the stacked (4d, n+d) weights, gate order i,f,g,o."""
    d = len(h_prev)
    z = w @ np.concatenate([x, h_prev]) + b
    i = sigmoid(z[:d])
    f = sigmoid(z[d : 2 * d])
    g = np.tanh(z[2 * d : 3 * d])
    o = sigmoid(z[3 * d :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def log_softmax_reference(v):
    v = np.asarray(v, dtype=float)
    m = v.max()
    return v - m - np.log(np.exp(v - m).sum())


def levenshtein_reference(a, b):
    """Recursive definition, memoized; independent of the DP in metrics."""
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        if a[i] == b[j]:
            return go(i + 1, j + 1)
        return 1 + min(go(i + 1, j), go(i, j + 1), go(i + 1, j + 1))

    return go(0, 0)
