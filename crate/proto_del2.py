"""Corrected deletion-decoder feasibility: exact-L uniform subsets (matches
the scoring model exactly), brute-force validation, and a (del, err) grid."""
import numpy as np
from scipy.special import gammaln
from scipy.stats import norm
from itertools import combinations

rng = np.random.default_rng(11)


def forward_llr(w, c, err):
    T, ell = c.shape
    L = w.shape[1]
    match, mism = 1.0 - err, err
    F = np.zeros((T, ell))
    logoff = np.zeros(T)
    for i in range(L):
        e = np.where(c == w[:, i : i + 1], match, mism)
        if i == 0:
            F = e.copy()
        else:
            S = np.cumsum(F, axis=1)
            Fn = np.zeros_like(F)
            Fn[:, 1:] = e[:, 1:] * S[:, :-1]
            F = Fn
        m = F.max(axis=1)
        m[m == 0] = 1e-300
        F /= m[:, None]
        logoff += np.log2(m)
    total = F.sum(axis=1)
    logC = (gammaln(ell + 1) - gammaln(L + 1) - gammaln(ell - L + 1)) / np.log(2)
    return np.log2(np.maximum(total, 1e-300)) + logoff - logC + L


def brute_llr(w, c, err):
    ell, L = len(c), len(w)
    tot = 0.0
    for q in combinations(range(ell), L):
        p = 1.0
        for i, j in enumerate(q):
            p *= (1.0 - err) if w[i] == c[j] else err
        tot += p
    from math import comb, log2
    return log2(tot / comb(ell, L)) + L


def probe(ell, d, err, T=1200, alphas=(1e-3, 1e-4)):
    L = int(round(ell * (1 - d)))
    c = rng.integers(0, 2, size=(T, ell), dtype=np.int8)
    w = np.zeros((T, L), dtype=np.int8)
    for t in range(T):
        q = np.sort(rng.choice(ell, size=L, replace=False))
        surv = c[t, q]
        w[t] = surv ^ (rng.random(L) < err)
    wn = rng.integers(0, 2, size=(T, L), dtype=np.int8)
    cn = rng.integers(0, 2, size=(T, ell), dtype=np.int8)
    ls = forward_llr(w, c, err)
    ln = forward_llr(wn, cn, err)
    out = f"ell={ell} d={d} err={err}: sig {ls.mean():7.2f}±{ls.std():5.2f}  null {ln.mean():7.2f}±{ln.std():5.2f}"
    for a in alphas:
        tau = ln.mean() + ln.std() * norm.isf(a)
        q_pow = (ls > tau).mean()
        det16 = 1 - (1 - 0.5 * q_pow) ** 32  # 32 blocks, half of them good
        out += f" | a={a:g}: pow={q_pow:.3f} det={det16:.3f}"
    print(out)


# validation vs brute force
cv = rng.integers(0, 2, size=(1, 10), dtype=np.int8)
wv = rng.integers(0, 2, size=(1, 4), dtype=np.int8)
fast = forward_llr(wv, cv, 0.3)[0]
slow = brute_llr(wv[0], cv[0], 0.3)
print(f"validation: fast={fast:.6f} brute={slow:.6f}")
assert abs(fast - slow) < 1e-6

print("--- criterion-7 regime ---")
probe(1024, 0.5, 0.30)
print("--- error sensitivity at d=0.5 ---")
probe(1024, 0.5, 0.10)
probe(1024, 0.5, 0.25)
print("--- deletion sensitivity at err=0.3 ---")
probe(1024, 0.3, 0.30)
probe(1024, 0.2, 0.30)
probe(1024, 0.1, 0.30)
probe(1024, 0.05, 0.30)
print("--- scaling in ell at criterion rates ---")
probe(2048, 0.5, 0.30, T=600)
probe(4096, 0.5, 0.30, T=220)
