"""Hot loop of the exact evaluator: detector inefficiency, dark counts, lookup.

For every detected-mode Fock state ``phi`` with weight ``P(phi)`` the kernel
enumerates binomially thinned patterns (inefficiency) and dark-count subsets
of at most ``kmax`` modes, maps the result through the detector model,
looks it up in the post-selection plan and accumulates true/false positive
probability.

Two implementations share one signature. The numba one is used unless the
environment variable ``BELLSIM_DISABLE_NUMBA`` is set to a truthy value or
numba cannot be imported; the numpy one is kept as the reference path.
"""

from __future__ import annotations

import math
import os
from itertools import combinations

import numpy as np

from .detection import MASKED, DetectorModel, encode_patterns, lookup_keys, model_map_array, modes_per_word

_DISABLE = os.environ.get("BELLSIM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLE:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def dark_subset_tail(m: int, xi: float, kmax: int) -> float:
    """Probability that more than ``kmax`` of ``m`` modes see a dark count."""
    if kmax >= m or xi == 0.0:
        return 0.0
    kept = sum(math.comb(m, s) * xi ** s * (1 - xi) ** (m - s) for s in range(kmax + 1))
    return max(0.0, 1.0 - kept)


# ----------------------------------------------------------------- numpy path

def _thin_numpy(occ, weight, flags, eta):
    rows = occ.astype(np.int16)
    prob = weight.astype(np.float64)
    if eta >= 1.0:
        return rows, prob, flags
    for mode in range(rows.shape[1]):
        n = rows[:, mode]
        top = int(n.max(initial=0))
        if top == 0:
            continue
        new_rows, new_prob, new_flags = [], [], []
        for k in range(top + 1):
            sel = n >= k
            r = rows[sel].copy()
            nn = r[:, mode].astype(np.int64)
            r[:, mode] = k
            binom = np.array([math.comb(int(x), k) for x in nn], dtype=np.float64)
            new_rows.append(r)
            new_prob.append(prob[sel] * binom * eta ** k * (1 - eta) ** (nn - k))
            new_flags.append(flags[sel])
        rows = np.concatenate(new_rows)
        prob = np.concatenate(new_prob)
        flags = np.concatenate(new_flags)
    return rows, prob, flags


def _dark_subsets(m, kmax, xi):
    kmax = min(kmax, m) if xi > 0 else 0
    sets = [np.zeros(m, np.int16)]
    probs = [(1 - xi) ** m]
    for s in range(1, kmax + 1):
        p = xi ** s * (1 - xi) ** (m - s)
        for combo in combinations(range(m), s):
            v = np.zeros(m, np.int16)
            v[list(combo)] = 1
            sets.append(v)
            probs.append(p)
    return np.array(sets), np.array(probs)


def accumulate_numpy(occ, weight, is_true, label_in, eta_d, xi, model, kmax,
                     keys, labels, radix, chunk_elems=4_000_000):
    rows, prob, flags = _thin_numpy(np.asarray(occ), np.asarray(weight), np.asarray(is_true), eta_d)
    m = rows.shape[1]
    subsets, sprob = _dark_subsets(m, kmax, xi)
    tp = fp = 0.0
    step = max(1, chunk_elems // max(1, len(subsets) * m))
    for lo in range(0, len(rows), step):
        r = rows[lo:lo + step]
        vals = (r[:, None, :] + subsets[None, :, :]).reshape(-1, m)
        rep = model_map_array(vals, model)
        lab = lookup_keys(keys, labels, encode_patterns(rep, radix))
        found = lab >= 0
        contrib = (prob[lo:lo + step, None] * sprob[None, :]).ravel()
        true_mask = found & (lab == label_in) & np.repeat(flags[lo:lo + step], len(subsets))
        tp += float(contrib[true_mask].sum())
        fp += float(contrib[found & ~true_mask].sum())
    return tp, fp


# ----------------------------------------------------------------- numba path

if HAVE_NUMBA:
    _PNRD, _BD, _SLOW_PNRD, _SLOW_BD = (int(m) for m in DetectorModel)

    @njit(cache=True)
    def _lookup(keys, labels, key):
        lo, hi = 0, keys.shape[0]
        w = keys.shape[1]
        while lo < hi:
            mid = (lo + hi) // 2
            less = False
            for j in range(w):
                if keys[mid, j] != key[j]:
                    less = keys[mid, j] < key[j]
                    break
            if less:
                lo = mid + 1
            else:
                hi = mid
        if lo == keys.shape[0]:
            return -1
        for j in range(w):
            if keys[lo, j] != key[j]:
                return -1
        return labels[lo]

    @njit(cache=True)
    def _add_detector(key, d, a, b, model, sign, word, weight):
        if model == _BD or model == _SLOW_BD:
            a = min(a, 1)
            b = min(b, 1)
        if (model == _SLOW_PNRD or model == _SLOW_BD) and a >= 1:
            b = MASKED
        j = 2 * d
        key[word[j]] += sign * (a + 1) * weight[j]
        key[word[j + 1]] += sign * (b + 1) * weight[j + 1]

    @njit(cache=True)
    def _dark_pass(t, p_thin, is_true, label_in, xi, model, kmax, keys, labels, word, weight):
        # the key of the thinned pattern is built once; a dark-count subset
        # only rewrites the contributions of the detectors it touches
        m = t.shape[0]
        tp = 0.0
        fp = 0.0
        smax = min(kmax, m) if xi > 0.0 else 0
        idx = np.empty(max(smax, 1), np.int64)
        key = np.zeros(keys.shape[1], np.int64)
        for d in range(m // 2):
            _add_detector(key, d, t[2 * d], t[2 * d + 1], model, 1, word, weight)
        for s in range(smax + 1):
            p_dark = xi ** s * (1.0 - xi) ** (m - s)
            for i in range(s):
                idx[i] = i
            while True:
                i = 0
                while i < s:
                    d = idx[i] // 2
                    _add_detector(key, d, t[2 * d], t[2 * d + 1], model, -1, word, weight)
                    da = 0
                    db = 0
                    while i < s and idx[i] // 2 == d:
                        if idx[i] % 2 == 0:
                            da = 1
                        else:
                            db = 1
                        i += 1
                    _add_detector(key, d, t[2 * d] + da, t[2 * d + 1] + db, model, 1, word, weight)
                lab = _lookup(keys, labels, key)
                i = 0
                while i < s:
                    d = idx[i] // 2
                    da = 0
                    db = 0
                    while i < s and idx[i] // 2 == d:
                        if idx[i] % 2 == 0:
                            da = 1
                        else:
                            db = 1
                        i += 1
                    _add_detector(key, d, t[2 * d] + da, t[2 * d + 1] + db, model, -1, word, weight)
                    _add_detector(key, d, t[2 * d], t[2 * d + 1], model, 1, word, weight)
                if lab >= 0:
                    w = p_thin * p_dark
                    if is_true and lab == label_in:
                        tp += w
                    else:
                        fp += w
                # next combination of s indices out of m
                j = s - 1
                while j >= 0 and idx[j] == m - s + j:
                    j -= 1
                if j < 0:
                    break
                idx[j] += 1
                for i in range(j + 1, s):
                    idx[i] = idx[i - 1] + 1
        return tp, fp

    @njit(cache=True)
    def _accumulate_numba(occ, weight, is_true, label_in, eta_d, xi, model, kmax, keys, labels, word, weight_of):
        k_rows, m = occ.shape
        tp = 0.0
        fp = 0.0
        t = np.empty(m, np.int64)
        n = np.empty(m, np.int64)
        # binomial coefficients for counts up to 64
        binom = np.zeros((65, 65))
        for a in range(65):
            binom[a, 0] = 1.0
            for b in range(1, a + 1):
                binom[a, b] = binom[a - 1, b - 1] + (binom[a - 1, b] if b <= a - 1 else 0.0)
        for r in range(k_rows):
            w = weight[r]
            if w == 0.0:
                continue
            for i in range(m):
                n[i] = occ[r, i]
                t[i] = n[i]
            if eta_d >= 1.0:
                a, b = _dark_pass(t, w, is_true[r], label_in, xi, model, kmax, keys, labels, word, weight_of)
                tp += a
                fp += b
                continue
            for i in range(m):
                t[i] = 0
            while True:
                p = w
                for i in range(m):
                    if n[i] > 0:
                        p *= binom[n[i], t[i]] * eta_d ** t[i] * (1.0 - eta_d) ** (n[i] - t[i])
                if p > 0.0:
                    a, b = _dark_pass(t, p, is_true[r], label_in, xi, model, kmax, keys, labels, word, weight_of)
                    tp += a
                    fp += b
                # odometer over 0..n[i]
                i = 0
                while i < m:
                    if t[i] < n[i]:
                        t[i] += 1
                        break
                    t[i] = 0
                    i += 1
                if i == m:
                    break
        return tp, fp

    def accumulate_numba(occ, weight, is_true, label_in, eta_d, xi, model, kmax, keys, labels, radix):
        keys = np.ascontiguousarray(keys, dtype=np.int64).reshape(len(keys), -1)
        if len(keys) == 0:
            return 0.0, 0.0
        m = np.shape(occ)[1]
        per_word = modes_per_word(int(radix))
        word = np.arange(m, dtype=np.int64) // per_word
        weight_of = np.array([int(radix) ** (j % per_word) for j in range(m)], dtype=np.int64)
        return _accumulate_numba(
            np.ascontiguousarray(occ, dtype=np.int64), np.ascontiguousarray(weight, dtype=np.float64),
            np.ascontiguousarray(is_true, dtype=np.bool_), int(label_in), float(eta_d), float(xi),
            int(model), int(kmax), keys, np.ascontiguousarray(labels, dtype=np.int64), word, weight_of)

    accumulate = accumulate_numba
else:
    accumulate_numba = None
    accumulate = accumulate_numpy
