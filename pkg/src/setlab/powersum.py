"""Exact sum-decomposition through power sums.

Encoding a multiset {x_1..x_M} as (sum x_i^q)_{q=1..M} is injective on
multisets of [-1, 1] and has a continuous inverse, so any continuous
permutation-invariant target f factors exactly as rho(Phi(x)) with
rho = f o Phi^{-1}. The numerical inverse here converts power sums to
elementary symmetric polynomials with Newton's identities and recovers the
multiset as the roots of the monic polynomial via Aberth-Ehrlich iteration.

A variable-size codec extends this to sets with up to M_max elements by
measuring each element against a filler value outside the data domain.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleLatent, SizeError
from .sets import as_set_input, canonicalize

# Power sums are badly conditioned in high degree; the supported claims are
# desk-scale, so set sizes are capped.
M_CAP = 12

IMAG_TOL = 1e-6  # roots further from the real axis than this are infeasible
DOMAIN_SLACK = 1e-6  # roots may poke this far out of [-1, 1] before rejection
REPRODUCE_TOL = 1e-6  # recovered multiset must reproduce the latent this well

ABERTH_MAX_ITER = 200
ABERTH_TOL = 1e-13


def kahan_sum(terms, axis=-1):
    """Compensated summation along one axis (classic Kahan)."""
    terms = np.asarray(terms, dtype=float)
    terms = np.moveaxis(terms, axis, 0)
    total = np.zeros(terms.shape[1:])
    comp = np.zeros_like(total)
    for t in terms:
        y = t - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return total if total.shape else float(total)


def _check_m(m):
    if not 1 <= m <= M_CAP:
        raise SizeError(f"set size {m} outside supported range 1..{M_CAP}")


def power_sum_encode(x):
    """Latent vector (sum_i x_i^q) for q = 1..M.

    Inputs are sorted before accumulation and summed with compensation, so the
    result is bit-for-bit identical across permutations of x.
    """
    u = canonicalize(x)
    _check_m(u.size)
    return _encode_sorted(u[None, :])[0]


def power_sum_encode_batch(X):
    """Row-wise power_sum_encode for an (n_sets, M) array."""
    X = np.asarray(X, dtype=float)
    U = np.sort(X, axis=1)[:, ::-1]
    _check_m(U.shape[1])
    return _encode_sorted(U)


def _encode_sorted(U):
    """Power sums of pre-sorted rows; q-th powers built by cumulative products."""
    n, m = U.shape
    out = np.empty((n, m))
    pw = U.copy()
    for q in range(m):
        out[:, q] = kahan_sum(pw, axis=1)
        if q < m - 1:
            pw *= U
    return out


def power_sums_to_elementary(p):
    """Newton's identities: k*e_k = sum_{i=1..k} (-1)^(i-1) e_{k-i} p_i.

    p has shape (n, M); returns e of shape (n, M+1) with e[:, 0] = 1.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    n, m = p.shape
    e = np.zeros((n, m + 1))
    e[:, 0] = 1.0
    for k in range(1, m + 1):
        acc = np.zeros(n)
        for i in range(1, k + 1):
            term = e[:, k - i] * p[:, i - 1]
            acc += term if i % 2 == 1 else -term
        e[:, k] = acc / k
    return e


def elementary_to_monic(e):
    """Coefficients (highest degree first) of prod (t - x_i) from e_0..e_M."""
    e = np.atleast_2d(np.asarray(e, dtype=float))
    signs = (-1.0) ** np.arange(e.shape[1])
    return e * signs


def aberth_roots(coeffs, max_iter=ABERTH_MAX_ITER, tol=ABERTH_TOL):
    """Simultaneous root iteration for a batch of monic real polynomials.

    coeffs: (n, M+1) with coeffs[:, 0] = 1. Returns complex roots (n, M).
    Iterates the Aberth-Ehrlich correction w_i / (1 - w_i * sum_{j!=i}
    1/(z_i - z_j)) with w = P/P' until every correction falls below tol
    (relative to 1 + |z|), then applies one Newton polish per root.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    n, mp1 = coeffs.shape
    m = mp1 - 1
    if m == 0:
        return np.empty((n, 0), dtype=complex)

    # initial guesses on a Cauchy-bound circle, angle-offset off the real axis
    radius = 1.0 + np.max(np.abs(coeffs[:, 1:]), axis=1)
    angles = 2.0 * np.pi * (np.arange(m) + 0.5) / m + 0.25
    z = radius[:, None] * np.exp(1j * angles)[None, :]

    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        za = z[active]
        pv, dpv = _horner_pair(coeffs[active], za)
        # pairwise reciprocal differences; diagonal set to 1 and its
        # contribution subtracted from each row sum
        diff = za[:, :, None] - za[:, None, :]
        np.einsum("kii->ki", diff)[...] = 1.0
        s = np.sum(1.0 / diff, axis=2) - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(pv == 0, 0.0, pv / np.where(dpv == 0, 1.0, dpv))
            denom = 1.0 - w * s
            corr = np.where(np.abs(denom) > 1e-300, w / denom, w)
        corr = np.where(pv == 0, 0.0, corr)
        z[active] = za - corr
        done = np.max(np.abs(corr) / (1.0 + np.abs(za)), axis=1) <= tol
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break

    # single Newton polish
    pv, dpv = _horner_pair(coeffs, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(np.abs(dpv) > 1e-300, pv / dpv, 0.0)
    z = z - np.where(np.isfinite(step), step, 0.0)
    return z


def _horner_pair(coeffs, z):
    """Vectorized P(z), P'(z) for rows of coefficients (highest degree first)."""
    pv = np.zeros_like(z) + coeffs[:, 0:1]
    dpv = np.zeros_like(z)
    for k in range(1, coeffs.shape[1]):
        dpv = dpv * z + pv
        pv = pv * z + coeffs[:, k : k + 1]
    return pv, dpv


def _linkage_groupings(roots):
    """Single-linkage dendrogram of the roots, finest to coarsest.

    Yields one label array per level — every clustering that merging roots
    within some radius could produce, so no radius schedule can miss a level.
    """
    m = roots.size
    labels = np.arange(m)
    dist = np.abs(roots[:, None] - roots[None, :])
    out = [labels.copy()]
    for _ in range(m - 1):
        gap = np.where(labels[:, None] != labels[None, :], dist, np.inf)
        a, b = np.unravel_index(np.argmin(gap), gap.shape)
        labels[labels == labels[b]] = labels[a]
        out.append(labels.copy())
    return out


def _merge_groups(roots, labels, coeffs):
    """Replace each cluster of roots by its polished center.

    A cluster stemming from one multiple root splays like eps^(1/multiplicity),
    but its mean is accurate to coefficient-perturbation order, and polishing
    the mean on the (multiplicity-1)-th derivative (where the center is a
    simple root) sharpens it to full precision.
    """
    merged = roots.copy()
    for lab in np.unique(labels):
        comp = np.flatnonzero(labels == lab)
        if comp.size > 1:
            mu = np.mean(roots[comp])
            rest = np.delete(roots, comp)
            # the polished center may travel further than the cluster spread
            # (the mean inherits the coefficient-perturbation error), but it
            # must stay closer to the cluster than to any foreign root
            leash = 4.0 * np.max(np.abs(roots[comp] - mu))
            if rest.size:
                leash = max(leash, 0.5 * np.min(np.abs(rest - mu)))
            merged[comp] = _polish_center(coeffs, mu, comp.size, leash)
    return merged


def _polish_center(coeffs, mu, mult, leash):
    """Newton-refine a cluster center on the (mult-1)-th derivative."""
    c = np.asarray(coeffs, dtype=complex)
    for _ in range(mult - 1):
        deg = c.size - 1
        c = c[:-1] * np.arange(deg, 0, -1)
    z = complex(mu)
    for _ in range(3):
        pv, dpv = _horner_pair(c[None, :], np.array([[z]]))
        pv, dpv = pv[0, 0], dpv[0, 0]
        if abs(dpv) < 1e-300:
            break
        z = z - pv / dpv
    return z if abs(z - mu) <= leash else mu


def _realize(roots, imag_tol=IMAG_TOL, slack=DOMAIN_SLACK):
    """Project near-real roots to the axis and clamp to [-1, 1], or None."""
    if np.max(np.abs(roots.imag)) > imag_tol:
        return None
    real = roots.real
    if np.max(np.abs(real)) > 1.0 + slack:
        return None
    return np.sort(np.clip(real, -1.0, 1.0))[::-1].copy()


def _reproduces(u_sorted, p, tol=REPRODUCE_TOL):
    return np.max(np.abs(_encode_sorted(u_sorted[None, :])[0] - p)) <= tol


def _fit_values(v, counts, p, steps=12):
    """Gauss-Newton on distinct values with fixed multiplicities against p.

    Iterates are clipped to [-1, 1] (the init too), so the fit can only ever
    propose domain-feasible multisets.
    """
    q = np.arange(1.0, p.size + 1.0)[:, None]
    v = np.clip(v, -1.0, 1.0)
    best, best_err = v, np.inf
    for _ in range(steps):
        resid = (counts * v ** q).sum(axis=1) - p
        err = np.max(np.abs(resid))
        if err < best_err:
            best, best_err = v.copy(), err
        if err == 0.0:
            break
        jac = counts * q * v ** (q - 1.0)
        step = np.linalg.lstsq(jac, resid, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        v = np.clip(v - step, -1.0, 1.0)
    return best


def _refine_multiset(u_sorted, p, steps=12):
    """Gauss-Newton on the distinct values of u against the target power sums.

    A root cluster perturbs nearby simple roots beyond the reproduction
    tolerance; polishing the value/multiplicity structure directly against p
    removes that error when the structure is correct.
    """
    vals, counts = np.unique(u_sorted, return_counts=True)
    best = _fit_values(vals.copy(), counts.astype(float), p, steps)
    return np.sort(np.repeat(best, counts))[::-1]


def _block_structures(m):
    """Block-size compositions of m (for sorted roots), fewest blocks first."""
    out = []
    for mask in range(2 ** (m - 1)):
        cuts = [i + 1 for i in range(m - 1) if mask >> i & 1]
        bounds = [0, *cuts, m]
        out.append(tuple(b - a for a, b in zip(bounds[:-1], bounds[1:])))
    out.sort(key=len)
    return out


def _decode_batch_masked(P, m):
    """Decode rows of power sums; returns (multisets, ok_mask)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] != m:
        raise DomainError(f"latent vector must have {m} coordinates, got {P.shape[1]}")
    _check_m(m)
    if not np.all(np.isfinite(P)):
        raise DomainError("latent vector contains non-finite entries")
    n = P.shape[0]
    coeffs = elementary_to_monic(power_sums_to_elementary(P))
    roots = aberth_roots(coeffs)

    out = np.zeros((n, m))
    ok = np.zeros(n, dtype=bool)

    # fast path: vectorized feasibility + reproduction check
    imag_ok = np.max(np.abs(roots.imag), axis=1) <= IMAG_TOL
    real = np.clip(roots.real, -1.0, 1.0)
    dom_ok = np.max(np.abs(roots.real), axis=1) <= 1.0 + DOMAIN_SLACK
    cand = np.sort(real, axis=1)[:, ::-1]
    plain = imag_ok & dom_ok
    if plain.any():
        rep = np.max(np.abs(_encode_sorted(cand[plain]) - P[plain]), axis=1) <= REPRODUCE_TOL
        idx = np.flatnonzero(plain)[rep]
        out[idx] = cand[np.flatnonzero(plain)[rep]]
        ok[idx] = True

    # slow path: multiple roots splay into small complex rings, so walk the
    # clusterings of the dendrogram, polish each cluster center, refine the
    # realized multiset against p, and accept the first that reproduces it
    for i in np.flatnonzero(~ok):
        for labels in _linkage_groupings(roots[i]):
            u = _realize(_merge_groups(roots[i], labels, coeffs[i]))
            if u is None:
                continue
            u = _refine_multiset(u, P[i])
            if _reproduces(u, P[i]):
                out[i] = u
                ok[i] = True
                break
        if ok[i]:
            continue
        # nearby multiple roots splay into overlapping rings no clustering can
        # separate, but the sorted real parts still split into blocks per true
        # root; fit every block structure directly against p
        r = np.sort(roots[i].real)
        for counts in _block_structures(m):
            bounds = np.cumsum((0,) + counts)
            v0 = np.array([r[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])])
            v = _fit_values(v0, np.asarray(counts, dtype=float), P[i])
            u = np.sort(np.repeat(v, counts))[::-1]
            if _reproduces(u, P[i]):
                out[i] = u
                ok[i] = True
                break
    return out, ok


def power_sum_decode(p, M):
    """Recover the descending multiset whose power sums are p.

    Raises InfeasibleLatent when p is not (within tolerance) the encoding of
    any multiset of [-1, 1]^M: recovered roots with |imag| > 1e-6, roots
    outside [-1, 1] by more than 1e-6, or a power-sum mismatch beyond 1e-6.
    """
    out, ok = _decode_batch_masked(np.asarray(p, dtype=float)[None, :], M)
    if not ok[0]:
        raise InfeasibleLatent(f"latent {np.asarray(p)} is not an encoding of a multiset in [-1,1]^{M}")
    return out[0]


def power_sum_decode_batch(P, M):
    """Row-wise power_sum_decode; raises on the first infeasible row."""
    out, ok = _decode_batch_masked(P, M)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise InfeasibleLatent(f"row {bad} is not an encoding of a multiset in [-1,1]^{M}")
    return out


def exact_eval(target, x):
    """Evaluate a permutation-invariant target as rho(Phi(x)).

    The value is required to pass through the latent vector: x is encoded,
    decoded back to a multiset, and only then fed to the target.
    """
    x = as_set_input(x)
    p = power_sum_encode(x)
    u = power_sum_decode(p, x.size)
    return float(target(u))


@dataclass(frozen=True)
class VarSizeCodec:
    """Fixed-width codec for sets with 0..M_max elements.

    The filler value sits strictly outside the data domain (margin >= 0.5), so
    genuine elements and padding can never be confused.
    """

    M_max: int
    filler: float = 2.0

    def __post_init__(self):
        if not 1 <= self.M_max <= M_CAP:
            raise SizeError(f"M_max must be in 1..{M_CAP}, got {self.M_max}")
        if abs(self.filler) < 1.5:
            raise DomainError(f"filler {self.filler} must clear [-1, 1] by at least 0.5")

    def filler_powers(self):
        k = float(self.filler)
        return np.array([k ** q for q in range(1, self.M_max + 1)])


def varsize_encode(x, codec):
    """Latent vector (sum_i (x_i^q - k^q)) for q = 1..M_max.

    The empty set maps to the zero vector; sets larger than M_max are a
    SizeError. Equals the power sums of the k-padded multiset minus the
    constant M_max-fold k contribution, so it stays injective across sizes.
    """
    x = np.asarray(x, dtype=float)
    if x.size > codec.M_max:
        raise SizeError(f"set has {x.size} elements, codec supports at most {codec.M_max}")
    if x.size == 0:
        return np.zeros(codec.M_max)
    u = canonicalize(x)
    n, kp = u.size, codec.filler_powers()
    pw = u.copy()
    out = np.empty(codec.M_max)
    for q in range(codec.M_max):
        out[q] = kahan_sum(pw) - n * kp[q]
        pw = pw * u
    return out


def varsize_decode(p, codec):
    """Recover the (possibly empty) descending multiset behind a codec latent.

    The data size M' is not stored, so each candidate size is tried: re-adding
    M'*k^q recovers the data power sums, whose decode is accepted exactly when
    re-encoding reproduces p (injectivity across sizes makes the accepted size
    unique). Any recovered root within 1e-4 of the filler is treated as
    padding and dropped before verification.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (codec.M_max,):
        raise DomainError(f"latent must have {codec.M_max} coordinates, got shape {p.shape}")
    kp = codec.filler_powers()
    for m in range(codec.M_max + 1):
        u = _try_varsize(p, codec, kp, m)
        if u is not None:
            return u
    raise InfeasibleLatent(f"latent {p} is not a codec encoding of any set of size <= {codec.M_max}")


def _try_varsize(p, codec, kp, m):
    if m == 0:
        return np.empty(0) if np.max(np.abs(p)) <= REPRODUCE_TOL else None
    s = p[:m] + m * kp[:m]
    out, ok = _decode_batch_masked(s[None, :], m)
    if not ok[0]:
        return None
    u = out[0]
    u = u[np.abs(u - codec.filler) > 1e-4]
    if np.max(np.abs(varsize_encode(u, codec) - p)) > REPRODUCE_TOL:
        return None
    return u


def varsize_decode_batch(P, codec):
    """Row-wise varsize_decode returning a list of descending multisets."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] != codec.M_max:
        raise DomainError(f"latent rows must have {codec.M_max} coordinates")
    kp = codec.filler_powers()
    results = [None] * P.shape[0]
    unresolved = np.ones(P.shape[0], dtype=bool)

    zero = np.max(np.abs(P), axis=1) <= REPRODUCE_TOL
    for i in np.flatnonzero(zero):
        results[i] = np.empty(0)
    unresolved[zero] = False

    for m in range(1, codec.M_max + 1):
        rows = np.flatnonzero(unresolved)
        if rows.size == 0:
            break
        s = P[rows, :m] + m * kp[:m]
        out, ok = _decode_batch_masked(s, m)
        for j, i in enumerate(rows):
            if not ok[j]:
                continue
            u = out[j]
            u = u[np.abs(u - codec.filler) > 1e-4]
            if np.max(np.abs(varsize_encode(u, codec) - P[i])) <= REPRODUCE_TOL:
                results[i] = u
                unresolved[i] = False
    if unresolved.any():
        bad = int(np.flatnonzero(unresolved)[0])
        raise InfeasibleLatent(f"row {bad} is not a codec encoding of any set of size <= {codec.M_max}")
    return results
