"""Random-variate generation for every draw the Gibbs sampler makes.

Conventions fixed here and relied on everywhere else:

* Gamma draws are parameterized by (shape, rate), mean = shape / rate.
* Wishart draws are parameterized by (dof, scale), mean = dof * scale.
* All samplers take a ``numpy.random.Generator``; seed bookkeeping lives in
  :class:`RngStream`.

The Polya-Gamma sampler is exact (Devroye-style rejection) for the b = 1
kernel and composes it for the integer part of b; the fractional part falls
back to a truncated weighted-Gamma series with a deterministic tail-mean
correction.  Hot loops are numba-compiled.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidParameterError
from .linalg import chol_with_jitter

__all__ = [
    "PgParams",
    "RngStream",
    "sample_pg",
    "sample_pg_vector",
    "pg_mean",
    "pg_series_mean",
    "sample_table_count",
    "sample_table_counts",
    "table_count_log_pmf",
    "sample_gamma_rate",
    "sample_mvn",
    "sample_mvn_prec",
    "sample_wishart",
    "sample_dirichlet",
]


# ---------------------------------------------------------------------------
# Seed bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """A reproducible, spawnable random stream.

    Identical (seed, stream_id) pairs reproduce identical draw sequences;
    distinct stream ids give statistically independent streams.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        )

    def derive(self, *key: int) -> np.random.Generator:
        """Child generator keyed by a tuple of integers (e.g. step, period)."""
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *key))
        )


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


# ---------------------------------------------------------------------------
# Polya-Gamma
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PgParams:
    """Shape b > 0 and tilt c of a PG(b, c) variate."""

    b: float
    c: float = 0.0

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise InvalidParameterError(f"PG shape b must be positive, got {self.b}")
        if not math.isfinite(self.c):
            raise InvalidParameterError(f"PG tilt c must be finite, got {self.c}")


_TRUNC = 0.64  # split point of the Jacobi proposal (exponential vs inverse-Gaussian)
_PG_SERIES_TERMS = 200  # weighted-Gamma series length for fractional shapes


@njit(cache=True)
def _norm_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@njit(cache=True)
def _mass_texpon(z):
    # Probability that the Jacobi proposal falls in the exponential tail x > t.
    t = _TRUNC
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    cdf_b = _norm_cdf(b)
    cdf_a = _norm_cdf(a)
    xb = math.exp(x0 - z) * cdf_b if cdf_b > 0.0 else 0.0
    xa = math.exp(x0 + z) * cdf_a if cdf_a > 0.0 else 0.0
    qdivp = 4.0 / math.pi * (xb + xa)
    return 1.0 / (1.0 + qdivp)


@njit(cache=True)
def _rtigauss(z, rng):
    # Inverse-Gaussian(1/z, 1) truncated to (0, _TRUNC].
    t = _TRUNC
    x = t + 1.0
    if z < 1.0 / t:  # mean above the truncation point (covers z == 0)
        while True:
            while True:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
                if e1 * e1 <= 2.0 * e2 / t:
                    break
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            if rng.random() <= math.exp(-0.5 * z * z * x):
                return x
    else:
        mu = 1.0 / z
        while x > t:
            y = rng.standard_normal()
            y *= y
            mu_y = mu * y
            x = mu + 0.5 * mu * mu_y - 0.5 * mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
        return x


@njit(cache=True)
def _jacobi_coef(n, x):
    # n-th coefficient of the alternating series bounding the Jacobi density.
    if x > _TRUNC:
        return (
            math.pi
            * (n + 0.5)
            * math.exp(-((n + 0.5) * (n + 0.5)) * math.pi * math.pi * x / 2.0)
        )
    return (
        math.pi
        * (n + 0.5)
        * (2.0 / (math.pi * x)) ** 1.5
        * math.exp(-2.0 * ((n + 0.5) * (n + 0.5)) / x)
    )


@njit(cache=True)
def _pg1_draw(c, rng):
    # Exact PG(1, c) via Devroye-style rejection on the Jacobi density.
    z = 0.5 * abs(c)
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    p_right = _mass_texpon(z)
    while True:
        if rng.random() < p_right:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(z, rng)
        s = _jacobi_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _jacobi_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _jacobi_coef(n, x)
                if y > s:
                    break


@njit(cache=True)
def _pg_frac_draw(b, c, rng):
    # Truncated weighted-Gamma series for fractional shape 0 < b < 1, with
    # the truncated tail replaced by its exact mean.
    d = c * c / (4.0 * math.pi * math.pi)
    total = 0.0
    for k in range(1, _PG_SERIES_TERMS + 1):
        denom = (k - 0.5) * (k - 0.5) + d
        total += rng.standard_gamma(b) / denom
    if d > 0.0:
        tail = (math.pi / 2.0 - math.atan(_PG_SERIES_TERMS / math.sqrt(d))) / math.sqrt(d)
    else:
        tail = 1.0 / _PG_SERIES_TERMS
    total += b * tail
    return total / (2.0 * math.pi * math.pi)


@njit(cache=True)
def _pg_draw(b, c, rng):
    n_int = int(b)
    frac = b - n_int
    total = 0.0
    for _ in range(n_int):
        total += _pg1_draw(c, rng)
    if frac > 1e-12:
        total += _pg_frac_draw(frac, c, rng)
    return total


@njit(cache=True)
def _pg_draw_many(b, c, out, rng):
    for i in range(b.shape[0]):
        out[i] = _pg_draw(b[i], c[i], rng)


def sample_pg(params: PgParams, rng) -> float:
    """One PG(b, c) draw."""
    rng = _as_generator(rng)
    return _pg_draw(float(params.b), float(params.c), rng)


def sample_pg_vector(b, c, rng):
    """Element-wise PG(b_i, c_i) draws for equal-length arrays b, c."""
    b = np.ascontiguousarray(b, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    if b.shape != c.shape:
        raise InvalidParameterError("b and c must have matching shapes")
    if not np.all(b > 0):
        raise InvalidParameterError("PG shape b must be positive everywhere")
    rng = _as_generator(rng)
    out = np.empty_like(b)
    _pg_draw_many(b.ravel(), c.ravel(), out.reshape(-1), rng)
    return out


def pg_mean(b, c):
    """Exact mean of PG(b, c): b/(2c) tanh(c/2), continuous at c = 0."""
    c = float(c)
    if abs(c) < 1e-8:
        return b / 4.0
    return b / (2.0 * c) * math.tanh(c / 2.0)


def pg_series_mean(b, c, terms=10_000):
    """Mean of PG(b, c) by direct truncation of its defining Gamma series."""
    k = np.arange(1, terms + 1)
    return b / (2.0 * math.pi**2) * np.sum(1.0 / ((k - 0.5) ** 2 + c**2 / (4.0 * math.pi**2)))


# ---------------------------------------------------------------------------
# Latent table counts for the dispersion update
# ---------------------------------------------------------------------------


class _LogTriangleTable:
    """Cached log F(m, j) recursion table, grown on demand.

    F(1, 1) = 1, F(m, j) = 0 for j < 1 or j > m, and
    F(m, j) = ((m-1) F(m-1, j) + F(m-1, j-1)) / m.  Rows sum to one; entries
    underflow in linear space for large m, so the table is kept in logs.
    Read-only once grown, safe to share across threads.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._table = np.full((2, 2), -np.inf)
        self._table[1, 1] = 0.0

    def upto(self, y_max: int) -> np.ndarray:
        if y_max < self._table.shape[0] - 1:
            return self._table
        with self._lock:
            m_have = self._table.shape[0] - 1
            if y_max <= m_have:
                return self._table
            grown = np.full((y_max + 1, y_max + 1), -np.inf)
            grown[: m_have + 1, : m_have + 1] = self._table
            for m in range(m_have + 1, y_max + 1):
                prev = grown[m - 1]
                grown[m, 1 : m + 1] = np.logaddexp(
                    math.log(m - 1) + prev[1 : m + 1],
                    prev[0:m],
                ) - math.log(m)
            self._table = grown
        return self._table


_LOG_F = _LogTriangleTable()


def table_count_log_pmf(y: int, r: float):
    """Log pmf of the latent table count given y and dispersion r.

    Support is {0} when y = 0 and {1, ..., y} otherwise; index j of the
    returned array is the log-probability of j tables.
    """
    if y < 0 or y != int(y):
        raise InvalidParameterError(f"y must be a nonnegative integer, got {y}")
    if not r > 0:
        raise InvalidParameterError(f"r must be positive, got {r}")
    y = int(y)
    if y == 0:
        return np.zeros(1)
    table = _LOG_F.upto(y)
    logits = table[y, 1 : y + 1] + np.arange(1, y + 1) * math.log(r)
    out = np.full(y + 1, -np.inf)
    out[1:] = logits - _logsumexp(logits)
    return out


def _logsumexp(x):
    m = np.max(x)
    return m + math.log(np.sum(np.exp(x - m)))


def sample_table_count(y: int, r: float, rng) -> int:
    """One latent table-count draw for a single observation."""
    log_pmf = table_count_log_pmf(y, r)
    if log_pmf.shape[0] == 1:
        return 0
    rng = _as_generator(rng)
    cdf = np.cumsum(np.exp(log_pmf[1:]))
    return int(np.searchsorted(cdf, rng.random() * cdf[-1])) + 1


def sample_table_counts(y, r, rng):
    """Vectorized table-count draws, grouped by distinct count value.

    Cells are filled in index order within each distinct y, and distinct y
    values are visited in ascending order, so output is deterministic for a
    fixed generator state.
    """
    y = np.asarray(y)
    if np.any(y < 0):
        raise InvalidParameterError("counts must be nonnegative")
    if not r > 0:
        raise InvalidParameterError(f"r must be positive, got {r}")
    rng = _as_generator(rng)
    out = np.zeros(y.shape, dtype=np.int64)
    flat_y = y.ravel()
    flat_out = out.reshape(-1)
    table = _LOG_F.upto(int(flat_y.max())) if flat_y.size else None
    log_r = math.log(r)
    for value in np.unique(flat_y):
        v = int(value)
        if v == 0:
            continue
        logits = table[v, 1 : v + 1] + np.arange(1, v + 1) * log_r
        pmf = np.exp(logits - _logsumexp(logits))
        cdf = np.cumsum(pmf)
        idx = np.nonzero(flat_y == v)[0]
        u = rng.random(idx.shape[0]) * cdf[-1]
        flat_out[idx] = np.searchsorted(cdf, u) + 1
    return out


# ---------------------------------------------------------------------------
# Standard distributions under the conventions above
# ---------------------------------------------------------------------------


def sample_gamma_rate(shape, rate, rng):
    """Gamma(shape, rate) draw with mean shape / rate."""
    if not (shape > 0 and math.isfinite(shape)):
        raise InvalidParameterError(f"gamma shape must be positive, got {shape}")
    if not (rate > 0 and math.isfinite(rate)):
        raise InvalidParameterError(f"gamma rate must be positive, got {rate}")
    rng = _as_generator(rng)
    return rng.gamma(shape, 1.0 / rate)


def sample_mvn(mean, cov, rng):
    """Multivariate normal draw from a covariance parameterization."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (mean.shape[0], mean.shape[0]):
        raise InvalidParameterError("covariance shape does not match mean")
    rng = _as_generator(rng)
    chol = chol_with_jitter(cov)
    return mean + chol @ rng.standard_normal(mean.shape[0])


def sample_mvn_prec(mean, prec, rng):
    """Multivariate normal draw from a precision parameterization."""
    mean = np.asarray(mean, dtype=np.float64)
    prec = np.asarray(prec, dtype=np.float64)
    if prec.shape != (mean.shape[0], mean.shape[0]):
        raise InvalidParameterError("precision shape does not match mean")
    rng = _as_generator(rng)
    chol = chol_with_jitter(prec)
    return mean + np.linalg.solve(chol.T, rng.standard_normal(mean.shape[0]))


def sample_wishart(dof, scale, rng):
    """Wishart(dof, scale) draw with mean dof * scale (Bartlett decomposition)."""
    scale = np.asarray(scale, dtype=np.float64)
    dim = scale.shape[0]
    if scale.shape != (dim, dim):
        raise InvalidParameterError("scale must be square")
    if not dof >= dim:
        raise InvalidParameterError(f"dof must be >= dimension {dim}, got {dof}")
    rng = _as_generator(rng)
    chol = chol_with_jitter(scale)
    bartlett = np.zeros((dim, dim))
    for i in range(dim):
        bartlett[i, i] = math.sqrt(rng.chisquare(dof - i))
        for j in range(i):
            bartlett[i, j] = rng.standard_normal()
    factor = chol @ bartlett
    return factor @ factor.T


def sample_dirichlet(concentrations, rng):
    """Dirichlet draw; concentrations must be strictly positive."""
    conc = np.asarray(concentrations, dtype=np.float64)
    if np.any(conc <= 0):
        raise InvalidParameterError("Dirichlet concentrations must be positive")
    rng = _as_generator(rng)
    return rng.dirichlet(conc)
