"""Domain types for data, priors, and latent state; link-function arithmetic.

The observation model is a negative binomial with dispersion r and success
probability p = logistic(psi), where the linear predictor

    psi[i, t] = xf[i, t] @ gamma + xd[i, t] @ theta[t] + phi[i, t]

optionally gains a unit-specific random-coefficient term xr[i, t] @ beta[i].
Under this parameterization the conditional mean count is r * exp(psi).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError

__all__ = [
    "PanelDataset",
    "HyperParameters",
    "ParameterState",
    "DlmSystem",
    "link_psi",
    "link_psi_matrix",
    "nb_prob",
    "augment_z",
    "nb_log_pmf",
    "nb_log_pmf_psi",
    "softplus",
]


def softplus(x):
    """log(1 + exp(x)) without overflow; equals -log(1 - p) for p = logistic(x)."""
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class PanelDataset:
    """A balanced panel of counts and covariate blocks.

    Attributes:
        y: (n, T) nonnegative integer counts.
        xf: (n, T, g) covariates with time-invariant coefficients.
        xd: (n, T, q) covariates with time-varying coefficients.
        xr: optional (n, T, h) covariates with unit-specific random
            coefficients; present iff the mixture extension is enabled.
        unit_ids / period_labels: identifiers, in array order.
    """

    y: np.ndarray
    xf: np.ndarray
    xd: np.ndarray
    xr: np.ndarray | None = None
    unit_ids: tuple = ()
    period_labels: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 2:
            raise InvalidParameterError("y must be a (units, periods) matrix")
        if np.any(y < 0) or not np.issubdtype(y.dtype, np.integer):
            raise InvalidParameterError("counts must be nonnegative integers")
        n, T = y.shape
        for name, block in (("xf", self.xf), ("xd", self.xd), ("xr", self.xr)):
            if block is None:
                continue
            block = np.asarray(block)
            if block.shape[:2] != (n, T) or block.ndim != 3:
                raise InvalidParameterError(
                    f"{name} must have shape (n, T, k); got {block.shape}"
                )
            if not np.all(np.isfinite(block)):
                raise InvalidParameterError(f"{name} contains non-finite values")
        if not self.unit_ids:
            object.__setattr__(self, "unit_ids", tuple(range(n)))
        if not self.period_labels:
            object.__setattr__(self, "period_labels", tuple(range(1, T + 1)))

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def T(self):
        return self.y.shape[1]

    @property
    def g(self):
        return self.xf.shape[2]

    @property
    def q(self):
        return self.xd.shape[2]

    @property
    def h(self):
        return 0 if self.xr is None else self.xr.shape[2]

    @property
    def mixture(self):
        return self.xr is not None


@dataclass(frozen=True)
class HyperParameters:
    """Prior constants for both the base and extended samplers.

    All Gamma priors follow the (shape, rate) convention; covariance priors
    (S0, C0, B0, V0) must be SPD.  ``components`` is the mixture size C.
    """

    r0: float = 1.0
    e0: float = 0.01
    f0: float = 0.01
    s0: np.ndarray = None
    S0: np.ndarray = None
    m0: np.ndarray = None
    C0: np.ndarray = None
    c0: float = 0.01
    d0: float = 0.01
    a_sigma: float = 0.01
    b_sigma: float = 0.01
    rho: float = 1.0
    b0: np.ndarray = None
    B0: np.ndarray = None
    nu0: float = None
    V0: np.ndarray = None
    alpha0: float = 1.0
    components: int = 1

    @classmethod
    def defaults(cls, g, q, h=0, components=1, **overrides):
        """Weakly informative defaults sized to the covariate blocks."""
        values = dict(
            s0=np.zeros(g),
            S0=100.0 * np.eye(g),
            m0=np.zeros(q),
            C0=100.0 * np.eye(q),
            b0=np.zeros(h),
            B0=100.0 * np.eye(h),
            nu0=float(h + 2),
            V0=np.eye(h),
            components=components,
        )
        values.update(overrides)
        hyper = cls(**values)
        hyper.validate(g, q, h)
        return hyper

    def validate(self, g, q, h=0):
        for value, name in ((self.r0, "r0"), (self.e0, "e0"), (self.f0, "f0"),
                            (self.c0, "c0"), (self.d0, "d0"),
                            (self.a_sigma, "a_sigma"), (self.b_sigma, "b_sigma"),
                            (self.alpha0, "alpha0")):
            if not value > 0:
                raise InvalidParameterError(f"hyperparameter {name} must be positive")
        if self.s0.shape != (g,) or self.S0.shape != (g, g):
            raise InvalidParameterError("s0/S0 must match the fixed-covariate count")
        if self.m0.shape != (q,) or self.C0.shape != (q, q):
            raise InvalidParameterError("m0/C0 must match the dynamic-covariate count")
        if h:
            if self.b0.shape != (h,) or self.B0.shape != (h, h):
                raise InvalidParameterError("b0/B0 must match the random-covariate count")
            if self.V0.shape != (h, h):
                raise InvalidParameterError("V0 must match the random-covariate count")
            if not self.nu0 >= h:
                raise InvalidParameterError("nu0 must be at least h")
            if self.components < 1:
                raise InvalidParameterError("mixture needs at least one component")


@dataclass
class DlmSystem:
    """Time-invariant state-space operators: diagonal G = rho * I and
    diagonal state-noise covariance with entries sigma_theta_sq."""

    G: np.ndarray
    w_diag: np.ndarray

    def __post_init__(self):
        if np.any(self.w_diag <= 0):
            raise InvalidParameterError("state-noise variances must be positive")

    @classmethod
    def from_rho(cls, rho, sigma_theta_sq):
        sigma_theta_sq = np.asarray(sigma_theta_sq, dtype=np.float64)
        return cls(G=rho * np.eye(sigma_theta_sq.shape[0]), w_diag=sigma_theta_sq)


@dataclass
class ParameterState:
    """One Gibbs iteration's value of every latent quantity.

    Mutated in place by the sampler (single writer).  Mixture fields are None
    unless the extension is enabled.
    """

    r: float
    h: float
    gamma: np.ndarray          # (g,)
    theta: np.ndarray          # (T, q)
    sigma_theta_sq: np.ndarray # (q,)
    phi: np.ndarray            # (n, T)
    tau_sq: np.ndarray         # (T,)
    omega: np.ndarray          # (n, T)
    L: np.ndarray              # (n, T) int
    beta: np.ndarray | None = None    # (n, h)
    mu: np.ndarray | None = None      # (C, h)
    Sigma: np.ndarray | None = None   # (C, h, h)
    eta: np.ndarray | None = None     # (C,)
    labels: np.ndarray | None = None  # (n,) in 0..C-1
    alpha: np.ndarray = field(default=None)  # (T,) derived spatial-share statistic


def link_psi(state: ParameterState, data: PanelDataset, i: int, t: int) -> float:
    """Linear predictor for one cell; includes the beta term iff present."""
    psi = float(data.xf[i, t] @ state.gamma)
    if data.q:
        psi += float(data.xd[i, t] @ state.theta[t])
    psi += float(state.phi[i, t])
    if state.beta is not None and data.xr is not None:
        psi += float(data.xr[i, t] @ state.beta[i])
    return psi


def link_psi_matrix(state: ParameterState, data: PanelDataset) -> np.ndarray:
    """(n, T) linear predictor for the whole panel."""
    psi = data.xf @ state.gamma
    if data.q:
        psi = psi + np.einsum("itk,tk->it", data.xd, state.theta)
    psi = psi + state.phi
    if state.beta is not None and data.xr is not None:
        psi = psi + np.einsum("itk,ik->it", data.xr, state.beta)
    return psi


def nb_prob(psi):
    """Success probability p = logistic(psi), stable for |psi| up to ~700."""
    psi = np.asarray(psi, dtype=np.float64)
    if not np.all(np.isfinite(psi)):
        raise InvalidParameterError("psi must be finite")
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-psi))
    return out if out.ndim else float(out)


def augment_z(y, r, omega):
    """Gaussian pseudo-observation z = (y - r) / (2 omega)."""
    omega = np.asarray(omega, dtype=np.float64)
    if np.any(omega <= 0):
        raise InvalidParameterError("omega must be positive")
    out = (np.asarray(y, dtype=np.float64) - r) / (2.0 * omega)
    return out if out.ndim else float(out)


def nb_log_pmf(y, r, p):
    """Negative-binomial log pmf under the (r, p) odds parameterization."""
    y = np.asarray(y)
    p = np.asarray(p, dtype=np.float64)
    if not r > 0:
        raise InvalidParameterError(f"r must be positive, got {r}")
    if np.any((p <= 0) | (p >= 1)):
        raise InvalidParameterError("p must lie strictly inside (0, 1)")
    out = (
        gammaln(y + r) - gammaln(r) - gammaln(y + 1)
        + y * np.log(p) + r * np.log1p(-p)
    )
    return out if out.ndim else float(out)


def nb_log_pmf_psi(y, r, psi):
    """Same pmf evaluated from the linear predictor.

    Uses log p = psi - softplus(psi) and log(1 - p) = -softplus(psi) directly,
    avoiding the cancellation of forming p first.
    """
    y = np.asarray(y)
    psi = np.asarray(psi, dtype=np.float64)
    sp = softplus(psi)
    out = (
        gammaln(y + r) - gammaln(r) - gammaln(y + 1)
        + y * (psi - sp) - r * sp
    )
    return out if out.ndim else float(out)
