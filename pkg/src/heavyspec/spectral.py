"""Centering algebra and matrix-free spectral-norm computation.

The centering matrix H is banded (every row carries the same short window),
so H, H Hᵀ and H diag(d) Hᵀ are stored and applied with O(p * window) work.
Spectral norms of symmetric matrices are computed by Lanczos iteration with
full reorthogonalization, converging both extreme eigenvalues; a dense
eigensolve is used only as a cross-check oracle in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .linear_filter import CoefficientSequence
from .rv_noise import TailModel, index_uniforms, second_moment, truncated_second_moment

__all__ = [
    "BandedH",
    "CenteringSpec",
    "SpectralNormError",
    "SymBanded",
    "build_H",
    "centered_covariance",
    "centered_gram_diag",
    "gram_diag",
    "hdh_matrix",
    "hht_matrix",
    "mu_x_alpha",
    "offdiag_deviation",
    "spectral_norm",
]

_SPECTRAL_TAG = 0x51


class SpectralNormError(RuntimeError):
    """Iterative eigensolver failed to converge within the iteration cap."""


@dataclass(frozen=True)
class BandedH:
    """Banded rectangular matrix with one shared row window.

    H[i, i + shift + l] = weights[l]; all other entries are zero.  Every
    row hosts the full window, which the constructor enforces.
    """

    nrows: int
    ncols: int
    shift: int
    weights: tuple[float, ...]

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise ValueError("H must have positive dimensions")
        if not self.weights:
            raise ValueError("H window is empty")
        if self.shift < 0 or (self.nrows - 1) + self.shift + len(self.weights) - 1 >= self.ncols:
            raise ValueError(
                f"window does not fit: nrows={self.nrows} ncols={self.ncols} "
                f"shift={self.shift} window={len(self.weights)}"
            )

    @property
    def window(self) -> int:
        return len(self.weights)

    def dense(self) -> np.ndarray:
        h = np.zeros((self.nrows, self.ncols))
        for l, w in enumerate(self.weights):
            idx = np.arange(self.nrows)
            h[idx, idx + self.shift + l] = w
        return h

    def row_abs_sum(self) -> float:
        return float(sum(abs(w) for w in self.weights))


def build_H(theta: CoefficientSequence, p: int) -> BandedH:
    """The p x 3p centering matrix with entries theta_{p-(j-i)} for 0 <= j-i <= 2p.

    Lags of theta outside [-p, p] fall outside the indicator and are dropped.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    k_lo = max(theta.min_lag, -p)
    k_hi = min(theta.max_lag, p)
    if k_lo > k_hi:
        # Whole window is outside the indicator; H is structurally zero.
        return BandedH(nrows=p, ncols=3 * p, shift=p, weights=(0.0,))
    vals = theta.values[k_lo - theta.min_lag : k_hi - theta.min_lag + 1]
    return BandedH(nrows=p, ncols=3 * p, shift=p - k_hi, weights=tuple(reversed(vals)))


@dataclass(frozen=True, eq=False)
class SymBanded:
    """Symmetric banded matrix; bands[b, i] = A[i, i+b] for 0 <= b < nbands."""

    dim: int
    bands: np.ndarray

    def __post_init__(self):
        if self.bands.ndim != 2 or self.bands.shape[1] != self.dim:
            raise ValueError(f"bands must have shape (nbands, {self.dim})")

    def dense(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        nb = self.bands.shape[0]
        for b in range(nb):
            m = self.dim - b
            if m <= 0:
                break
            idx = np.arange(m)
            a[idx, idx + b] = self.bands[b, :m]
            if b > 0:
                a[idx + b, idx] = self.bands[b, :m]
        return a

    def matvec(self, v: np.ndarray) -> np.ndarray:
        y = self.bands[0] * v
        nb = self.bands.shape[0]
        for b in range(1, nb):
            m = self.dim - b
            if m <= 0:
                break
            band = self.bands[b, :m]
            y[:m] += band * v[b:]
            y[b:] += band * v[:m]
        return y

    def inf_norm(self) -> float:
        """Maximum absolute row sum."""
        r = np.abs(self.bands[0]).astype(float)
        nb = self.bands.shape[0]
        for b in range(1, nb):
            m = self.dim - b
            if m <= 0:
                break
            band = np.abs(self.bands[b, :m])
            r[:m] += band
            r[b:] += band
        return float(r.max())

    def max_abs(self) -> float:
        return float(np.abs(self.bands).max())


def hdh_matrix(H: BandedH, d: np.ndarray) -> SymBanded:
    """H diag(d) Hᵀ computed band by band.

    Entry (i, i+b) equals sum_u weights[u] * weights[u-b] * d[i + shift + u].
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (H.ncols,):
        raise ValueError(f"d must have length {H.ncols}, got shape {d.shape}")
    w = H.weights
    L = len(w)
    p = H.nrows
    bands = np.zeros((min(L, p), p))
    for b in range(bands.shape[0]):
        m = p - b
        acc = np.zeros(m)
        for u in range(b, L):
            lo = H.shift + u
            acc += w[u] * w[u - b] * d[lo : lo + m]
        bands[b, :m] = acc
    return SymBanded(dim=p, bands=bands)


def hht_matrix(H: BandedH) -> SymBanded:
    return hdh_matrix(H, np.ones(H.ncols))


@dataclass(frozen=True)
class CenteringSpec:
    """Scalar centering level mu together with the banded H and sample size n."""

    mu: float
    H: BandedH
    n: int


def mu_x_alpha(model: TailModel, c: CoefficientSequence, a_np: float) -> float:
    """Centering level: 0 below tail index 2, truncated second moment at 2 with
    infinite variance, the exact second moment otherwise; times sum c_j^2."""
    if not a_np > 0.0:
        raise ValueError(f"a_np must be positive, got {a_np}")
    if model.alpha < 2.0:
        return 0.0
    ez2 = second_moment(model)
    if model.alpha == 2.0 and math.isinf(ez2):
        return truncated_second_moment(model, a_np) * c.sq_sum
    return ez2 * c.sq_sum


def centered_covariance(xhat: np.ndarray, centering: CenteringSpec) -> np.ndarray:
    """S = X Xᵀ - n * mu * H Hᵀ, symmetrized after assembly."""
    xhat = np.asarray(xhat, dtype=float)
    if xhat.ndim != 2:
        raise ValueError("xhat must be a 2-d array")
    p, n = xhat.shape
    if centering.H.nrows != p:
        raise ValueError(f"H has {centering.H.nrows} rows, xhat has {p}")
    if centering.n != n:
        raise ValueError(f"centering.n = {centering.n} but xhat has {n} columns")
    s = xhat @ xhat.T
    if centering.mu != 0.0:
        s -= (n * centering.mu) * hht_matrix(centering.H).dense()
    asym = float(np.abs(s - s.T).max())
    scale = float(np.abs(s).max())
    if asym > 1e-12 * scale:
        raise ValueError(f"assembled S is asymmetric: |S - Sᵀ| = {asym:g} vs scale {scale:g}")
    return 0.5 * (s + s.T)


def gram_diag(x: np.ndarray) -> np.ndarray:
    """Row sums of squares, the diagonal of X Xᵀ."""
    x = np.asarray(x, dtype=float)
    return (x * x).sum(axis=1)


def centered_gram_diag(x: np.ndarray, mu: float) -> np.ndarray:
    """Row sums of (x^2 - mu): gram_diag(x) - n * mu."""
    x = np.asarray(x, dtype=float)
    return gram_diag(x) - x.shape[1] * mu


def offdiag_deviation(x: np.ndarray, a_np: float) -> float:
    """a_np^-2 times the spectral norm of X Xᵀ with its diagonal zeroed."""
    if not a_np > 0.0:
        raise ValueError(f"a_np must be positive, got {a_np}")
    x = np.asarray(x, dtype=float)
    g = x @ x.T
    g = 0.5 * (g + g.T)
    np.fill_diagonal(g, 0.0)
    return spectral_norm(g) / (a_np * a_np)


# ---------------------------------------------------------------------------
# Lanczos spectral norm.


def _tridiag_extremes(alphas: np.ndarray, betas: np.ndarray):
    """Extreme eigenvalues of the tridiagonal T and the last components of
    their eigenvectors (which bound the Lanczos residuals)."""
    k = alphas.shape[0]
    if k == 1:
        return float(alphas[0]), float(alphas[0]), 1.0, 1.0
    try:
        w_lo, v_lo = eigh_tridiagonal(alphas, betas, select="i", select_range=(0, 0))
        w_hi, v_hi = eigh_tridiagonal(alphas, betas, select="i", select_range=(k - 1, k - 1))
        return float(w_lo[0]), float(w_hi[0]), float(v_lo[-1, 0]), float(v_hi[-1, 0])
    except Exception:
        w, v = eigh_tridiagonal(alphas, betas)
        return float(w[0]), float(w[-1]), float(v[-1, 0]), float(v[-1, -1])


def _start_vector(dim: int, seed: int, attempt: int) -> np.ndarray:
    u = index_uniforms(seed, np.arange(dim), lane=attempt, tag=_SPECTRAL_TAG)
    return u - 0.5


def _lanczos_norm(matvec, dim: int, rel_tol: float, max_iter: int, seed: int) -> float:
    kmax = min(dim, max_iter)
    Q = np.empty((kmax, dim))
    alphas = np.empty(kmax)
    betas = np.empty(kmax)
    attempt = 0
    q = _start_vector(dim, seed, attempt)
    q /= np.linalg.norm(q)
    scale_est = 0.0
    tiny = np.finfo(float).tiny
    last_resid = math.inf
    for k in range(kmax):
        Q[k] = q
        u = matvec(q)
        a = float(q @ u)
        alphas[k] = a
        r = u - a * q
        if k > 0:
            r -= betas[k - 1] * Q[k - 1]
        # Full reorthogonalization keeps the Ritz residual estimate honest.
        r -= Q[: k + 1].T @ (Q[: k + 1] @ r)
        b = float(np.linalg.norm(r))
        betas[k] = b
        scale_est = max(scale_est, abs(a), b)

        lo, hi, s_lo, s_hi = _tridiag_extremes(alphas[: k + 1], betas[:k])
        norm_est = max(abs(lo), abs(hi))
        last_resid = b * max(abs(s_lo), abs(s_hi))
        if norm_est == 0.0:
            if k + 1 == dim or scale_est == 0.0:
                return 0.0
        elif last_resid <= rel_tol * norm_est:
            # Confirm with explicit residuals on the Ritz vectors.
            if k == 0:
                return norm_est
            w, v = eigh_tridiagonal(alphas[: k + 1], betas[:k])
            ok = True
            for col in (0, k):
                y = Q[: k + 1].T @ v[:, col]
                ny = np.linalg.norm(y)
                if ny <= tiny:
                    continue
                res = np.linalg.norm(matvec(y) - w[col] * y) / ny
                if res > rel_tol * norm_est:
                    ok = False
                    break
            if ok:
                return norm_est
        if k + 1 == dim:
            # Krylov space is the whole space; T is similar to A.
            return norm_est
        if b <= 64.0 * np.finfo(float).eps * max(scale_est, tiny):
            # Invariant subspace found; continue with a fresh direction.
            betas[k] = 0.0
            attempt += 1
            q = _start_vector(dim, seed, attempt)
            q -= Q[: k + 1].T @ (Q[: k + 1] @ q)
            nq = np.linalg.norm(q)
            if nq <= tiny:
                return norm_est
            q /= nq
        else:
            q = r / b
    raise SpectralNormError(
        f"no convergence after {kmax} iterations (last residual estimate {last_resid:g})"
    )


def spectral_norm(m, rel_tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest absolute eigenvalue of a symmetric matrix.

    Accepts a dense ndarray or a SymBanded; both are pre-scaled by their
    largest absolute entry, which makes the result exactly homogeneous under
    power-of-two scaling of the input.
    """
    if isinstance(m, SymBanded):
        f = m.max_abs()
        if f == 0.0:
            return 0.0
        scaled = SymBanded(dim=m.dim, bands=m.bands / f)
        return f * _lanczos_norm(scaled.matvec, m.dim, rel_tol, max_iter, seed)
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    scale = float(np.abs(a).max())
    asym = float(np.abs(a - a.T).max())
    if asym > 1e-12 * scale:
        raise ValueError(f"matrix is not symmetric: |A - Aᵀ| = {asym:g} vs scale {scale:g}")
    if scale == 0.0:
        return 0.0
    if a.shape[0] == 1:
        return abs(float(a[0, 0]))
    an = a / scale
    return scale * _lanczos_norm(lambda v: an @ v, a.shape[0], rel_tol, max_iter, seed)
