"""Sparse random matrices, resolvents and spectral-edge statistics.

Matrices are centered, normalized Erdos-Renyi adjacency matrices
h_ij = (a_ij - p) / (q sqrt(1 - p)) with q = sqrt(pN); the diagonal is
sampled like the off-diagonal entries.  Randomness comes from a counter-based
Philox generator keyed by (seed, stream), so every sample is reproducible on
its own and results do not depend on evaluation order.
"""

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, linalg

from .tw import TW1


class ParameterError(ValueError):
    pass


class DomainError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class OutOfModelWarning(UserWarning):
    pass


def make_rng(seed, stream=0):
    """Philox generator keyed by a 64-bit seed and a stream number."""
    mask = (1 << 64) - 1
    return np.random.Generator(np.random.Philox(key=[int(seed) & mask, int(stream) & mask]))


def kappa4_bernoulli(p):
    """Normalized fourth cumulant of a centered, rescaled Bernoulli(p) entry."""
    if not 0 < p < 1:
        raise ParameterError("p must lie in (0, 1)")
    # exact for Fraction input
    return (1 - 6 * p + 6 * p * p) / (6 * (1 - p))


@dataclass(frozen=True)
class ModelParams:
    N: int
    p: float
    seed: int = 0

    @classmethod
    def from_q(cls, N, q, seed=0):
        return cls(N, q * q / N, seed)

    @property
    def q(self):
        return math.sqrt(self.p * self.N)

    @property
    def kappa4(self):
        return kappa4_bernoulli(self.p)

    def check(self):
        if not 0 < self.p < 1:
            raise ParameterError("p must lie in (0, 1)")
        if not self.N ** (1 / 6) <= self.q <= self.N ** 0.5:
            warnings.warn(f"q = {self.q:.3g} outside [N^(1/6), N^(1/2)]", OutOfModelWarning)
        if self.kappa4 <= 0:
            warnings.warn(f"kappa4 = {self.kappa4:.3g} is not positive", OutOfModelWarning)
        return self


def sample_er(params, stream=0):
    """Symmetric normalized Erdos-Renyi matrix for (params.seed, stream)."""
    params.check()
    N, p = params.N, params.p
    rng = make_rng(params.seed, stream)
    a = np.triu(rng.random((N, N)) < p).astype(float)
    a = a + np.triu(a, 1).T
    return (a - p) / (params.q * math.sqrt(1 - p))


def sample_goe_hat(N, seed=0, stream=0):
    """Gaussian symmetric matrix, every entry (diagonal included) of variance 1/N."""
    rng = make_rng(seed, stream)
    g = np.triu(rng.standard_normal((N, N)))
    return (g + np.triu(g, 1).T) / math.sqrt(N)


def edge_shift(H, q, kappa4):
    """(chi, Lhat) with chi = (1/N) sum_ij (h_ij^2 - 1/N), Lhat = 2 + 6 kappa4/q^2 + chi."""
    N = H.shape[0]
    chi = (float(np.sum(H * H)) - N) / N
    return chi, 2 + 6 * kappa4 / q ** 2 + chi


def m_sc(z):
    """Semicircle Stieltjes transform: root of 1 + z m + m^2 = 0 with Im m > 0."""
    z = complex(z)
    if z.imag <= 0:
        raise DomainError("Im z must be positive")
    d = np.sqrt(complex(z * z - 4))
    # take the root without cancellation; the other is its reciprocal
    big = (-z - d) / 2 if (z.conjugate() * d).real >= 0 else (-z + d) / 2
    r1, r2 = big, 1 / big
    return r1 if r1.imag > r2.imag else r2


@dataclass
class GreenEval:
    z: complex
    G: np.ndarray
    m: complex
    psi: float = float("nan")


def green_eval(H, z, q=None):
    """Resolvent (H - z)^-1 with its normalized trace and the control parameter."""
    z = complex(z)
    if z.imag <= 0:
        raise DomainError("Im z must be positive")
    N = H.shape[0]
    A = H.astype(complex) - z * np.eye(N)
    try:
        G = linalg.solve(A, np.eye(N, dtype=complex), assume_a="sym")
    except linalg.LinAlgError as e:
        raise NumericalError(str(e)) from e
    m = complex(np.trace(G)) / N
    psi = float("nan")
    if q is not None:
        eta = z.imag
        psi = 1 / q + math.sqrt(m_sc(z).imag / (N * eta)) + 1 / (N * eta)
    return GreenEval(z, G, m, psi)


def ward_residual(ge):
    """Relative deviation of (1/N) sum |G_jk|^2 from Im m / eta."""
    N = ge.G.shape[0]
    lhs = float(np.sum(np.abs(ge.G) ** 2)) / N
    rhs = ge.m.imag / ge.z.imag
    return abs(lhs - rhs) / abs(rhs)


def im_m(eigs, E, eta):
    """Im m_N(E + i eta) from the spectrum."""
    eigs = np.asarray(eigs)
    return float(np.mean(eta / ((eigs - E) ** 2 + eta ** 2)))


def _spectrum(H):
    H = np.asarray(H)
    return H if H.ndim == 1 else linalg.eigvalsh(H)


def smoothed_count(H, E, E_L, eta):
    """(N/pi) int_E^E_L Im m_N(y + i eta) dy by adaptive quadrature.

    H may be a matrix or its (precomputed) spectrum.
    """
    if not E < E_L:
        raise ParameterError("need E < E_L")
    if eta <= 0:
        raise ParameterError("eta must be positive")
    eigs = _spectrum(H)
    N = len(eigs)
    pts = [x for x in eigs if E < x < E_L]
    val, err = integrate.quad(lambda y: im_m(eigs, y, eta), E, E_L,
                              points=pts or None, limit=max(500, 4 * len(pts)),
                              epsabs=1e-10, epsrel=1e-10)
    val *= N / math.pi
    if not np.isfinite(val) or err * N / math.pi > 1e-6:
        raise NumericalError(f"quadrature did not converge (error {err})")
    return val


def smoothed_count_exact(eigs, E, E_L, eta):
    """Closed form of smoothed_count via arctan differences."""
    eigs = np.asarray(eigs)
    return float(np.sum(np.arctan((E_L - eigs) / eta) - np.arctan((E - eigs) / eta)) / math.pi)


# ---------------------------------------------------------------- interpolating flow

@dataclass
class FlowState:
    W: np.ndarray
    H: np.ndarray
    t: float
    q: float
    kappa4: float

    @property
    def Ht(self):
        return flow_matrix(self.W, self.H, self.t)

    @property
    def chi(self):
        N = self.H.shape[0]
        return (1 - math.exp(-self.t)) * (float(np.sum(self.H * self.H)) - N) / N

    @property
    def L(self):
        return 2 + 6 * self.kappa4 * (1 - math.exp(-self.t)) ** 2 / self.q ** 2 + self.chi


def flow_matrix(W, H, t):
    return math.exp(-t / 2) * W + math.sqrt(1 - math.exp(-t)) * H


def flow_observable(state, g1, g2, eta):
    """X(t) = int_{g1}^{g2} Im Tr G(t, L_t + x + i eta) dx.

    Returns (quadrature value, closed-form value); they must agree.
    """
    if eta <= 0:
        raise ParameterError("eta must be positive")
    if g1 > g2:
        raise ParameterError("need g1 <= g2")
    if g1 == g2:
        return 0.0, 0.0
    eigs = linalg.eigvalsh(state.Ht)
    L = state.L
    N = len(eigs)
    pts = [x - L for x in eigs if g1 < x - L < g2]
    val, err = integrate.quad(lambda x: N * im_m(eigs, L + x, eta), g1, g2,
                              points=pts or None, limit=max(200, 4 * len(pts)),
                              epsabs=1e-10, epsrel=1e-10)
    if err > 1e-6:
        raise NumericalError(f"quadrature did not converge (error {err})")
    exact = float(np.sum(np.arctan((L + g2 - eigs) / eta) - np.arctan((L + g1 - eigs) / eta)))
    return val, exact


def pairwise_trace_check(Ht, a, b, E1, E2, eta):
    """Both sides of sum_v int Im[G_va G_bv] dx = Im G_ab(E2) - Im G_ab(E1).

    The left side is integrated numerically along E + i eta.
    """
    lam, U = linalg.eigh(Ht)
    wab = U[a] * U[b]

    def g2_ab(E):
        return complex(np.sum(wab / (lam - complex(E, eta)) ** 2))

    def g_ab(E):
        return complex(np.sum(wab / (lam - complex(E, eta))))

    lhs, _ = integrate.quad(lambda E: g2_ab(E).imag, E1, E2, limit=400,
                            epsabs=1e-12, epsrel=1e-10)
    return lhs, g_ab(E2).imag - g_ab(E1).imag


# ---------------------------------------------------------------- edge statistics

def largest_eigenvalue(H):
    N = H.shape[0]
    return float(linalg.eigh(H, eigvals_only=True, subset_by_index=[N - 1, N - 1],
                             driver="evr")[0])


def edge_statistics(params, stream):
    """(N^(2/3)(lambda_N - Lhat), N^(2/3)(lambda_N - 2)) from one sample."""
    H = sample_er(params, stream)
    lam = largest_eigenvalue(H)
    chi, Lhat = edge_shift(H, params.q, params.kappa4)
    scale = params.N ** (2 / 3)
    return scale * (lam - Lhat), scale * (lam - 2.0)


def edge_statistic(params, stream, shift=True):
    """N^(2/3)(lambda_N - Lhat), or N^(2/3)(lambda_N - 2) when shift is False."""
    return edge_statistics(params, stream)[0 if shift else 1]


def ks_distance(samples, tw, r0):
    """sup_{r > r0} |F_M(r) - F1(r)| and its binomial standard error."""
    x = np.sort(np.asarray(samples, dtype=float))
    M = len(x)
    below = int(np.searchsorted(x, r0, side="right"))
    xs = x[below:]
    F = tw.fast_cdf(xs)
    Fr0 = float(tw.fast_cdf(r0))
    i = np.arange(below, M)
    gaps = np.concatenate([[abs(below / M - Fr0)], np.abs((i + 1) / M - F), np.abs(i / M - F)])
    at = np.concatenate([[Fr0], F, F])
    k = int(np.argmax(gaps))
    Fk = float(at[k])
    stderr = math.sqrt(max(Fk * (1 - Fk), 1 / M) / M)
    return float(gaps[k]), stderr


@dataclass
class ConvergenceRow:
    N: int
    p: float
    q: float
    M: int
    seed: int
    r0: float
    ks: float
    ks_stderr: float
    shift: bool = True


def _stats_chunk(args):
    N, p, seed, streams = args
    params = ModelParams(N, p, seed)
    return [edge_statistics(params, s) for s in streams]


def edge_sample_pairs(params, M, jobs=1):
    """(M, 2) array of shifted and unshifted statistics on streams 0..M-1.

    The result does not depend on the job count.
    """
    streams = list(range(M))
    out = np.empty((M, 2))
    if jobs <= 1:
        out[:] = _stats_chunk((params.N, params.p, params.seed, streams))
        return out
    chunks = [streams[i::jobs] for i in range(jobs)]
    with ProcessPoolExecutor(jobs) as ex:
        args = [(params.N, params.p, params.seed, c) for c in chunks]
        for idx, vals in zip(chunks, ex.map(_stats_chunk, args)):
            out[idx] = vals
    return out


def edge_samples(params, M, shift=True, jobs=1):
    """M edge statistics on streams 0..M-1; identical for any job count."""
    return edge_sample_pairs(params, M, jobs)[:, 0 if shift else 1].copy()


def _setting_params(s):
    N = int(s["N"])
    if "p" in s:
        return ModelParams(N, float(s["p"]), int(s.get("seed", 0)))
    return ModelParams.from_q(N, N ** float(s["q_exponent"]), int(s.get("seed", 0)))


def convergence_experiment(config, tw=None, jobs=1):
    """Run each setting of ``config["settings"]``; returns (rows, samples).

    A setting gives N, either p or q_exponent, M, r0, seed and optionally
    shift (default True).
    """
    tw = tw or TW1()
    rows, samples = [], []
    for s in config["settings"]:
        M = int(s["M"])
        if M < 100:
            raise ParameterError("M < 100: sampling error would dominate")
        params = _setting_params(s)
        shift = bool(s.get("shift", True))
        xs = edge_samples(params, M, shift, jobs)
        ks, se = ks_distance(xs, tw, float(s["r0"]))
        rows.append(ConvergenceRow(params.N, params.p, params.q, M, params.seed,
                                   float(s["r0"]), ks, se, shift))
        samples.append(xs)
    return rows, samples


CSV_COLUMNS = ["N", "p", "q", "M", "seed", "r0", "ks", "ks_stderr"]


def rows_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + ["shift"])
    for r in rows:
        d = asdict(r)
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in CSV_COLUMNS]
                   + [int(r.shift)])
    return buf.getvalue()


# ---------------------------------------------------------------- counting sandwich

def sandwich_scales(N, q, eps=0.05):
    eta = N ** (-1 + eps) + N ** (2 * eps) * q ** -4
    return eta, N ** (6 * eps) * eta


def sandwich_check(eigs, Lhat, q, eps=0.05, r_grid=None, exact=False):
    """Check Tr chi_{E+l}*theta - N^-eps <= #(lambda >= E) <= Tr chi_{E-l}*theta + N^-eps.

    E runs over Lhat + N^(-2/3) r for r in r_grid.  Returns (ok, details).
    """
    eigs = np.sort(np.asarray(eigs))
    N = len(eigs)
    eta, l = sandwich_scales(N, q, eps)
    E_L = Lhat + 4 * N ** (-2 / 3 + eps)
    slack = N ** -eps
    r_grid = np.arange(-4.0, 2.01, 0.5) if r_grid is None else r_grid
    count = smoothed_count_exact if exact else smoothed_count
    details = []
    for r in r_grid:
        E = Lhat + N ** (-2 / 3) * r
        n = int(N - np.searchsorted(eigs, E, side="left"))
        lo = count(eigs, E + l, E_L, eta) - slack
        hi = count(eigs, E - l, E_L, eta) + slack
        details.append((float(r), lo, n, hi))
    ok = all(lo <= n <= hi for _, lo, n, hi in details)
    return ok, details
