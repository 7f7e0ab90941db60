"""Permutation-invariant pooling beyond plain summation.

k-ary pooling averages an order-sensitive map over all k-tuples of distinct
elements; sampled pooling averages over a seeded without-replacement draw of
full permutations; sorted evaluation canonicalizes instead of averaging. The
max-decomposition counterexample constructs two multisets that coordinate-wise
max-pooling cannot tell apart even though their sums differ.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ProbeDegenerate, SizeError
from .sets import as_set_input, canonicalize

TUPLE_CAP = 10**7
FACTORIAL_CAP = 8


@dataclass(frozen=True)
class TupleEnumeration:
    """All k-tuples of distinct indices from range(M), lexicographic."""

    M: int
    k: int
    tuples: tuple

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)


def enumerate_ktuples(M, k):
    """Lexicographic k-tuples with distinct entries; P(M,k) = M!/(M-k)! of them."""
    M, k = int(M), int(k)
    if not 1 <= k <= M <= 10:
        raise SizeError(f"need 1 <= k <= M <= 10, got k={k}, M={M}")
    if math.perm(M, k) > TUPLE_CAP:
        raise SizeError(f"P({M},{k}) = {math.perm(M, k)} exceeds the {TUPLE_CAP} tuple cap")
    return TupleEnumeration(M, k, tuple(itertools.permutations(range(M), k)))


def _exact_mean(rows, count):
    """Mean of float vectors with exact rational accumulation, rounded once.

    Floats are dyadic rationals, so summing them as Fractions is exact; the
    single rounding at the end makes algebraically equal pooling reductions
    (e.g. k-ary over a first-element-only map vs. unary) bit-identical.
    """
    dim = rows[0].size
    totals = [Fraction(0)] * dim
    for row in rows:
        for j in range(dim):
            totals[j] += Fraction(float(row[j]))
    return np.array([float(t / count) for t in totals])


def janossy_pool(x, k, phi, rho=None):
    """rho of the mean of phi over all distinct-entry k-tuples of x.

    phi maps a length-k vector to a scalar or vector; rho (default identity)
    maps the pooled vector to a float. Permutation-invariant by construction.
    """
    x = as_set_input(x)
    tuples = enumerate_ktuples(x.size, k)
    rows = [np.atleast_1d(np.asarray(phi(x[list(t)]), dtype=float)) for t in tuples]
    pooled = _exact_mean(rows, len(tuples))
    if rho is None:
        return float(pooled[0]) if pooled.size == 1 else pooled
    return float(rho(pooled))


def _unrank_permutation(rank, M):
    """Lehmer decoding: the rank-th permutation of range(M) in lexicographic order."""
    digits = []
    for base in range(1, M + 1):
        rank, digit = divmod(rank, base)
        digits.append(digit)
    remaining = list(range(M))
    return tuple(remaining.pop(d) for d in reversed(digits))


def sampled_pool(x, g, p, seed):
    """Mean of g over p permutations of x drawn uniformly without replacement.

    Deterministic given the seed: a seeded shuffle of the M! permutation ranks
    picks the sample, each rank is Lehmer-decoded to an ordering, and the mean
    uses the same exact rational accumulation as janossy_pool — so p = M!
    reproduces the full average bit-for-bit no matter the seed.
    """
    x = as_set_input(x)
    M = x.size
    if M > FACTORIAL_CAP:
        raise SizeError(f"sampled pooling enumerates permutation ranks; M={M} > {FACTORIAL_CAP}")
    total = math.factorial(M)
    p = int(p)
    if not 1 <= p <= total:
        raise SizeError(f"need 1 <= p <= M! = {total}, got p={p}")
    rng = np.random.default_rng(seed)
    ranks = np.sort(rng.permutation(total)[:p])
    rows = [np.atleast_1d(float(g(x[list(_unrank_permutation(int(r), M))]))) for r in ranks]
    return float(_exact_mean(rows, p)[0])


def sorted_eval(x, g):
    """g applied to the canonical (descending) ordering; exactly invariant."""
    return float(g(canonicalize(x)))


def _max_counterexample_attempt(phi, probes):
    """One construction pass; None if the sum gap is below the validity floor."""
    outputs = phi.eval(probes)  # (M, N)
    mu = np.argmax(outputs, axis=0)
    untouched = sorted(set(range(probes.size)) - set(int(i) for i in mu))
    if not untouched:
        return None
    m = untouched[0]
    x_tilde = probes.copy()
    x_tilde[m] = probes[mu[0]]
    if abs(math.fsum(x_tilde) - math.fsum(probes)) < 1e-6:
        return None
    report = {
        "argmax": [int(i) for i in mu],
        "replaced_index": m,
        "sum_gap": abs(math.fsum(x_tilde) - math.fsum(probes)),
    }
    return probes, x_tilde, report


def max_decomp_counterexample(phi, M, probes=None):
    """Two multisets with bit-equal coordinate-wise max-pools but different sums.

    Replaces one element that never attains a coordinate max (it exists since
    phi has fewer coordinates than the multiset has elements) with the element
    attaining the first coordinate's max — the pools cannot move, the sum does.
    """
    M = int(M)
    if phi.N >= M:
        raise SizeError(f"need encoder dimension below the set size, got N={phi.N}, M={M}")
    if probes is not None:
        probes = np.asarray(probes, dtype=float)
        attempt = _max_counterexample_attempt(phi, probes)
        if attempt is None:
            raise ProbeDegenerate("supplied probe set collapses under the encoder")
        return attempt
    attempt = _max_counterexample_attempt(phi, np.linspace(-1.0, 1.0, M))
    if attempt is not None:
        return attempt
    rng = np.random.default_rng(0)
    min_gap = 1e-3
    for trial in range(100):
        if trial == 50:
            min_gap = 1.0 / M  # widen the probe spacing if tight probes keep collapsing
        draw = np.sort(rng.uniform(-1.0, 1.0, size=M))
        if np.min(np.diff(draw)) < min_gap:
            continue
        attempt = _max_counterexample_attempt(phi, draw)
        if attempt is not None:
            return attempt
    raise ProbeDegenerate("probe set collapses under the encoder after 100 resamples")
