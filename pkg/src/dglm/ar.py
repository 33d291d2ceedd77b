"""Gaussian AR(p) prior linear algebra: banded precision matrices,
block conditionals for proposal distributions, and path simulation."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded


class ArError(ValueError):
    pass


@dataclass
class InverseGamma:
    """Standard inverse-gamma prior; the univariate reduction of an
    inverse-Wishart(df, scale^-1) has shape = df/2, scale = scale/2."""
    shape: float
    scale: float


@dataclass
class TruncatedGaussian:
    """Zero-mean Gaussian prior with variance g, truncated to sigma^2 > 0."""
    g: float


@dataclass
class ArProcessSpec:
    """An AR(p) process on a q-dimensional coefficient vector.

    F holds the p autoregressive matrices.  sigma_beta is the evolution
    covariance; the sampler updates its diagonal components, so it must be
    diagonal whenever variance priors are attached.  The p initialising
    vectors are a-priori independent N(init_mean, init_cov).
    """
    p: int
    F: list
    sigma_beta: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    variance_priors: list = field(default_factory=list)
    free_F: bool = False

    def __post_init__(self):
        self.F = [np.atleast_2d(np.asarray(f, dtype=float)) for f in self.F]
        self.sigma_beta = np.atleast_2d(np.asarray(self.sigma_beta, dtype=float))
        self.init_mean = np.atleast_1d(np.asarray(self.init_mean, dtype=float))
        self.init_cov = np.atleast_2d(np.asarray(self.init_cov, dtype=float))
        if len(self.F) != self.p:
            raise ArError(f"expected {self.p} AR matrices, got {len(self.F)}")
        q = self.q
        for f in self.F:
            if f.shape != (q, q):
                raise ArError("AR matrix dimensions inconsistent with sigma_beta")
        if self.free_F and q != 1:
            raise ArError("free AR coefficients are supported for scalar processes only")

    @property
    def q(self):
        return self.sigma_beta.shape[0]


@dataclass
class ArPrecision:
    """Symmetric banded precision of the stacked coefficient vector.

    Index space covers times -p+1 .. n, so the matrix is (n+p)q square
    with scalar bandwidth pq + q - 1.  Stored in upper banded (LAPACK)
    layout: ab[bw + i - j, j] = K[i, j] for j - bw <= i <= j.
    """
    ab: np.ndarray
    n: int
    p: int
    q: int

    @property
    def bw(self):
        return self.ab.shape[0] - 1

    @property
    def dim(self):
        return (self.n + self.p) * self.q

    def index(self, t, component=0):
        """Stacked index of coefficient ``component`` at time t (-p+1 <= t <= n)."""
        return (t + self.p - 1) * self.q + component

    def to_dense(self):
        m = self.dim
        bw = self.bw
        K = np.zeros((m, m))
        for d in range(bw + 1):
            diag = self.ab[bw - d, d:]
            idx = np.arange(m - d)
            K[idx, idx + d] = diag
            K[idx + d, idx] = diag
        return K

    def matvec(self, x):
        bw = self.bw
        y = self.ab[bw] * x
        for d in range(1, bw + 1):
            diag = self.ab[bw - d, d:]
            y[:-d] += diag * x[d:]
            y[d:] += diag * x[:-d]
        return y


def _innovation_maps(F):
    """[I, -F_1, ..., -F_p] for the innovation nu_t = sum_l G_l beta_{t-l}."""
    q = F[0].shape[0] if F else 1
    return [np.eye(q)] + [-f for f in F]


def _accumulate(ab, G, S, n, p, q):
    """Add sum_t G_l1' S G_l2 contributions for innovations t = 1..n."""
    bw = ab.shape[0] - 1
    for l1 in range(p + 1):
        for l2 in range(p + 1):
            C = G[l1].T @ S @ G[l2]
            for a in range(q):
                for b in range(q):
                    c = C[a, b]
                    if c == 0.0:
                        continue
                    d = (l1 - l2) * q + (b - a)  # j - i, constant over t
                    if d < 0:
                        continue  # lower triangle; filled by the symmetric combo
                    j0 = (p - l2) * q + b
                    ab[bw - d, j0 : j0 + n * q : q] += c


def build_precision(spec: ArProcessSpec, n: int) -> ArPrecision:
    """Precision K of the (improper) AR prior, K = A' (I_n x Sigma^-1) A.

    beta' K beta equals the sum over t = 1..n of the Gaussian innovation
    quadratic forms; the initialiser prior N(mu_0, Sigma_0) is *not*
    folded in (it is handled separately by the sampler).
    """
    q, p = spec.q, spec.p
    try:
        S = np.linalg.inv(spec.sigma_beta)
    except np.linalg.LinAlgError as exc:
        raise ArError("sigma_beta is singular") from exc
    bw = p * q + q - 1
    ab = np.zeros((bw + 1, (n + p) * q))
    _accumulate(ab, _innovation_maps(spec.F), S, n, p, q)
    return ArPrecision(ab=ab, n=n, p=p, q=q)


def component_precisions(spec: ArProcessSpec, n: int):
    """Unit-variance precision per diagonal innovation component.

    For diagonal sigma_beta, K = sum_j K0_j / sigma_j^2 where K0_j is built
    with Sigma^-1 = e_j e_j'.  Lets the sampler rescale K after a variance
    update without reassembling it.
    """
    q, p = spec.q, spec.p
    G = _innovation_maps(spec.F)
    bw = p * q + q - 1
    out = []
    for j in range(q):
        S = np.zeros((q, q))
        S[j, j] = 1.0
        ab = np.zeros((bw + 1, (n + p) * q))
        _accumulate(ab, G, S, n, p, q)
        out.append(ab)
    return out


@dataclass
class BlockConditional:
    """Gaussian conditional of the block beta_{r..s} given the rest under
    the zero-mean distribution with precision K."""
    r: int
    s: int
    mean: np.ndarray
    chol: np.ndarray  # upper banded Cholesky of K_tilde (K_tilde = U'U)

    @property
    def cov(self):
        m = self.mean.shape[0]
        return cho_solve_banded((self.chol, False), np.eye(m))

    def sample(self, rng):
        z = rng.standard_normal(self.mean.shape[0])
        bw = self.chol.shape[0] - 1
        return self.mean + solve_banded((0, bw), self.chol, z)


def sub_banded(K: ArPrecision, r: int, s: int):
    """Banded slice K_tilde_{r,s} with cross-block entries zeroed."""
    q = K.q
    i0 = K.index(r)
    i1 = K.index(s) + q
    sub = K.ab[:, i0:i1].copy()
    bw = K.bw
    # entries in the first bw columns whose row index precedes the block
    for jj in range(min(bw, i1 - i0)):
        sub[: bw - jj, jj] = 0.0
    return sub


def _cross_term(K: ArPrecision, beta, r, s):
    """b_i = sum over out-of-block neighbours j of K[i,j] beta_j."""
    q, bw = K.q, K.bw
    i0 = K.index(r)
    i1 = K.index(s) + q
    m = i1 - i0
    b = np.zeros(m)
    ab = K.ab
    lo = max(0, i0 - bw)
    for j in range(lo, i0):  # left neighbours; K[i,j] = K[j,i] via symmetry
        for i in range(i0, min(j + bw + 1, i1)):
            b[i - i0] += ab[bw + j - i, i] * beta[j]
    hi = min(K.dim, i1 + bw)
    for j in range(i1, hi):  # right neighbours
        for i in range(max(i0, j - bw), i1):
            b[i - i0] += ab[bw + i - j, j] * beta[j]
    return b


def block_conditional(K: ArPrecision, beta, r, s) -> BlockConditional:
    """Conditional moments of beta_{r..s} | rest, per the banded precision.

    mean = -K_tilde^{-1} (cross terms), cov = K_tilde^{-1}; the left-edge,
    right-edge and interior cases fall out of which neighbours exist.
    """
    if not (-K.p + 1 <= r <= s <= K.n):
        raise ArError(f"block ({r},{s}) out of range for n={K.n}, p={K.p}")
    sub = sub_banded(K, r, s)
    try:
        chol = cholesky_banded(sub, lower=False)
    except np.linalg.LinAlgError as exc:
        raise ArError("conditional precision not positive definite") from exc
    b = _cross_term(K, np.asarray(beta, dtype=float), r, s)
    mean = -cho_solve_banded((chol, False), b)
    return BlockConditional(r=r, s=s, mean=mean, chol=chol)


def log_prior_quadform(K: ArPrecision, beta):
    """Unnormalised log prior density -beta' K beta / 2."""
    beta = np.asarray(beta, dtype=float)
    return -0.5 * float(beta @ K.matvec(beta))


def simulate_ar_path(spec: ArProcessSpec, n: int, rng):
    """Draw initialisers from N(mu_0, Sigma_0) then run the AR recursion.

    Returns the stacked (n+p, q) path, rows indexed by time -p+1 .. n.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    q, p = spec.q, spec.p
    path = np.zeros((n + p, q))
    init_chol = np.linalg.cholesky(spec.init_cov) if np.any(spec.init_cov) else None
    for i in range(p):
        z = rng.standard_normal(q)
        path[i] = spec.init_mean + (init_chol @ z if init_chol is not None else 0.0)
    innov_chol = (
        np.linalg.cholesky(spec.sigma_beta) if np.any(spec.sigma_beta) else None
    )
    for t in range(1, n + 1):
        i = p + t - 1
        mean = np.zeros(q)
        for l in range(1, p + 1):
            mean += spec.F[l - 1] @ path[i - l]
        z = rng.standard_normal(q)
        path[i] = mean + (innov_chol @ z if innov_chol is not None else 0.0)
    return path


def innovations(spec: ArProcessSpec, path):
    """nu_t = beta_t - sum_l F_l beta_{t-l} for t = 1..n, shape (n, q)."""
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if path.shape[1] != spec.q:
        path = path.reshape(-1, spec.q)
    p = spec.p
    n = path.shape[0] - p
    nu = path[p:].copy()
    for l in range(1, p + 1):
        nu -= path[p - l : p - l + n] @ spec.F[l - 1].T
    return nu


def rw1_spec(tau2, mu0=0.0, sigma0=10.0, prior=None):
    return ArProcessSpec(
        p=1, F=[np.array([[1.0]])], sigma_beta=np.array([[tau2]]),
        init_mean=np.array([mu0]), init_cov=np.array([[sigma0]]),
        variance_priors=[prior] if prior is not None else [],
    )


def rw2_spec(tau2, mu0=0.0, sigma0=10.0, prior=None):
    return ArProcessSpec(
        p=2, F=[np.array([[2.0]]), np.array([[-1.0]])],
        sigma_beta=np.array([[tau2]]),
        init_mean=np.array([mu0]), init_cov=np.array([[sigma0]]),
        variance_priors=[prior] if prior is not None else [],
    )


def llt_spec(tau2, psi2, mu0=0.0, sigma0=10.0, delta0_var=10.0, priors=None):
    """Local linear trend: state (level, slope), F = [[1,1],[0,1]]."""
    return ArProcessSpec(
        p=1, F=[np.array([[1.0, 1.0], [0.0, 1.0]])],
        sigma_beta=np.diag([tau2, psi2]),
        init_mean=np.array([mu0, 0.0]),
        init_cov=np.diag([sigma0, delta0_var]),
        variance_priors=list(priors) if priors is not None else [],
    )
