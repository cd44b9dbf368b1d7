"""Deep Gaussian kernel, squared-MMD estimators, and the test-power objective.

Signature fields are compared through a Gaussian kernel on their flattened
entries.  The unbiased U-statistic drops the i = j terms and may go negative;
the biased V-statistic keeps all pairs and is non-negative, which is what the
single-sample detection score relies on.  All math is double precision with
index-ordered reductions, so results are bit-reproducible.
"""

from dataclasses import dataclass

import numpy as np

from .pfs import PFSGradients, PFSParams, project_batch, project_batch_backward

DEFAULT_LAMBDA = 1e-8


def _as_feature_matrix(fields) -> np.ndarray:
    """Stack a batch of signature fields into rows of flattened entries."""
    arr = np.asarray(fields, dtype=np.float64)
    if arr.ndim == 2:  # already (n, features)
        return arr
    if arr.ndim == 3:
        return arr.reshape(arr.shape[0], arr.shape[1] * arr.shape[2])
    raise ValueError(f"expected a batch of fields, got array of ndim {arr.ndim}")


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows, clamped at zero."""
    sq_a = np.einsum("ij,ij->i", a, a)
    sq_b = np.einsum("ij,ij->i", b, b)
    d = sq_a[:, None] + sq_b[None, :] - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return d


def _kernel(dists: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(dists / (-2.0 * gamma * gamma))


def deep_kernel(zx, zy, gamma: float) -> float:
    """Gaussian kernel on the flattened distance between two signature fields."""
    zx = np.asarray(zx, dtype=np.float64)
    zy = np.asarray(zy, dtype=np.float64)
    if zx.shape != zy.shape:
        raise ValueError(f"field shapes differ: {zx.shape} vs {zy.shape}")
    if not gamma > 0.0:
        raise ValueError(f"bandwidth must be positive, got {gamma}")
    diff = zx - zy
    return float(np.exp(np.sum(diff * diff) / (-2.0 * gamma * gamma)))


@dataclass(frozen=True)
class KernelMatrixBundle:
    """Kernel blocks over two equal-size batches, reused by value and gradient paths."""

    kxx: np.ndarray
    kyy: np.ndarray
    kxy: np.ndarray

    @property
    def h_matrix(self) -> np.ndarray:
        return self.kxx + self.kyy - self.kxy - self.kxy.T


def kernel_bundle(zx_batch, zy_batch, gamma: float) -> KernelMatrixBundle:
    """Compute the three kernel blocks for two equal-size signature batches."""
    fx = _as_feature_matrix(zx_batch)
    fy = _as_feature_matrix(zy_batch)
    if fx.shape != fy.shape:
        raise ValueError(f"batch shapes differ: {fx.shape} vs {fy.shape}")
    if not gamma > 0.0:
        raise ValueError(f"bandwidth must be positive, got {gamma}")
    return KernelMatrixBundle(
        kxx=_kernel(_pairwise_sq_dists(fx, fx), gamma),
        kyy=_kernel(_pairwise_sq_dists(fy, fy), gamma),
        kxy=_kernel(_pairwise_sq_dists(fx, fy), gamma),
    )


def mmd2_unbiased_from_bundle(bundle: KernelMatrixBundle) -> float:
    h = bundle.h_matrix
    n = h.shape[0]
    if n < 2:
        raise ValueError(f"the U-statistic needs at least 2 samples per side, got {n}")
    return float((h.sum() - np.trace(h)) / (n * (n - 1)))


def mmd2_unbiased(zx_batch, zy_batch, gamma: float) -> float:
    """Unbiased U-statistic squared MMD over equal-size batches; may be negative."""
    return mmd2_unbiased_from_bundle(kernel_bundle(zx_batch, zy_batch, gamma))


def mmd2_biased(zx_batch, zy_batch, gamma: float) -> float:
    """Biased V-statistic squared MMD; sizes may differ; always >= 0."""
    fx = _as_feature_matrix(zx_batch)
    fy = _as_feature_matrix(zy_batch)
    if fx.shape[0] < 1 or fy.shape[0] < 1:
        raise ValueError("both batches must be nonempty")
    if fx.shape[1] != fy.shape[1]:
        raise ValueError(f"feature dimensions differ: {fx.shape[1]} vs {fy.shape[1]}")
    if not gamma > 0.0:
        raise ValueError(f"bandwidth must be positive, got {gamma}")
    n, m = fx.shape[0], fy.shape[0]
    kxx = _kernel(_pairwise_sq_dists(fx, fx), gamma).sum() / (n * n)
    kyy = _kernel(_pairwise_sq_dists(fy, fy), gamma).sum() / (m * m)
    kxy = _kernel(_pairwise_sq_dists(fx, fy), gamma).sum() / (n * m)
    return float(max(kxx + kyy - 2.0 * kxy, 0.0))


def variance_h1(h: np.ndarray) -> float:
    """Alternative-hypothesis variance estimate of the U-statistic.

    (4/N^3) sum_i (row sum)^2 - (4/N^4) (grand sum)^2, diagonal included,
    clamped at zero against roundoff.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"variance estimate needs a square matrix, got shape {h.shape}")
    n = h.shape[0]
    rows = h.sum(axis=1)
    # Pairwise form of (4/N^3) sum r_i^2 - (4/N^4) T^2: a sum of squared row-sum
    # differences, which is non-negative by construction and exactly zero on
    # constant-row input (the two-term form leaves FMA residue there).
    diffs = rows[:, None] - rows[None, :]
    value = 4.0 / n**3 * (np.sum(np.triu(diffs, 1) ** 2) / n)
    return float(max(value, 0.0))


def _objective_from_h(h: np.ndarray, lam: float):
    """J, its raw pieces, and dJ/dH for reuse by the gradient path."""
    n = h.shape[0]
    rows = h.sum(axis=1)
    total = rows.sum()
    mmd2 = (total - np.trace(h)) / (n * (n - 1))
    var_raw = 4.0 / n**3 * (np.dot(rows, rows) - total * total / n)
    var = max(var_raw, 0.0)
    denom = np.sqrt(var + lam)
    objective = mmd2 / denom

    d_mmd = 1.0 / denom
    d_var = -0.5 * mmd2 / denom**3 if var_raw > 0.0 else 0.0
    # dH_ij: off-diagonal MMD term plus the variance term (diagonal included).
    d_h = np.full((n, n), d_mmd / (n * (n - 1)))
    np.fill_diagonal(d_h, 0.0)
    d_h += d_var * (8.0 / n**3 * rows[:, None] - 8.0 / n**4 * total)
    return float(objective), float(mmd2), float(var), d_h


def test_power_objective(ex_batch, ey_batch, params: PFSParams, lam: float = DEFAULT_LAMBDA,
                         masks: tuple[np.ndarray, np.ndarray] | None = None):
    """Regularised test-power criterion J on PFS-projected embedding batches.

    ex_batch/ey_batch are raw patch-embedding batches of shape (N, K, embed_dim).
    Returns (J, bundle); the bundle is reused by the gradient path.  ``masks``
    optionally applies precomputed dropout masks to each side.
    """
    value, _, bundle, _ = _forward(ex_batch, ey_batch, params, lam, masks, with_cache=False)
    return value, bundle


def objective_gradients(ex_batch, ey_batch, params: PFSParams, lam: float = DEFAULT_LAMBDA,
                        masks: tuple[np.ndarray, np.ndarray] | None = None) -> PFSGradients:
    """Exact gradient of J with respect to every projection weight and log_gamma."""
    return objective_value_and_gradients(ex_batch, ey_batch, params, lam, masks)[2]


def objective_value_and_gradients(ex_batch, ey_batch, params: PFSParams,
                                  lam: float = DEFAULT_LAMBDA,
                                  masks: tuple[np.ndarray, np.ndarray] | None = None):
    """(J, stats dict, PFSGradients) in one reverse-mode pass."""
    value, stats, bundle, cache = _forward(ex_batch, ey_batch, params, lam, masks,
                                           with_cache=True)
    grads = _backward(bundle, cache, params)
    return value, stats, grads


def _forward(ex_batch, ey_batch, params, lam, masks, with_cache):
    ex = np.asarray(ex_batch, dtype=np.float64)
    ey = np.asarray(ey_batch, dtype=np.float64)
    if ex.shape != ey.shape:
        raise ValueError(f"batch shapes differ: {ex.shape} vs {ey.shape}")
    if ex.ndim != 3:
        raise ValueError(f"expected batches of shape (N, K, embed_dim), got {ex.shape}")
    if ex.shape[0] < 2:
        raise ValueError("the objective needs batches of at least 2")
    if not lam > 0.0:
        raise ValueError(f"the regulariser must be positive, got {lam}")
    mask_x, mask_y = masks if masks is not None else (None, None)

    zx, cache_x = project_batch(ex, params, mask_x, with_cache=True)
    zy, cache_y = project_batch(ey, params, mask_y, with_cache=True)
    n = ex.shape[0]
    fx = zx.reshape(n, -1)
    fy = zy.reshape(n, -1)
    gamma = params.gamma
    dxx = _pairwise_sq_dists(fx, fx)
    dyy = _pairwise_sq_dists(fy, fy)
    dxy = _pairwise_sq_dists(fx, fy)
    bundle = KernelMatrixBundle(_kernel(dxx, gamma), _kernel(dyy, gamma),
                                _kernel(dxy, gamma))
    objective, mmd2, var, d_h = _objective_from_h(bundle.h_matrix, lam)
    stats = {"objective": objective, "mmd2": mmd2, "variance": var, "gamma": gamma}
    cache = None
    if with_cache:
        cache = (zx, zy, cache_x, cache_y, fx, fy, dxx, dyy, dxy, d_h)
    return objective, stats, bundle, cache


def _backward(bundle, cache, params) -> PFSGradients:
    zx, zy, cache_x, cache_y, fx, fy, dxx, dyy, dxy, d_h = cache
    gamma = params.gamma
    scale = -1.0 / (2.0 * gamma * gamma)

    # H_ij = Kxx_ij + Kyy_ij - Kxy_ij - Kxy_ji.
    d_kxx = d_h
    d_kyy = d_h
    d_kxy = -(d_h + d_h.T)

    # K = exp(scale * D): distance gradients plus the bandwidth chain.
    d_dxx = d_kxx * bundle.kxx * scale
    d_dyy = d_kyy * bundle.kyy * scale
    d_dxy = d_kxy * bundle.kxy * scale
    # d(scale)/d(log gamma) = -2 * scale, applied to sum dK * K * D.
    d_log_gamma = -2.0 * scale * (
        np.sum(d_kxx * bundle.kxx * dxx)
        + np.sum(d_kyy * bundle.kyy * dyy)
        + np.sum(d_kxy * bundle.kxy * dxy)
    )

    # D_ab = ||f_a - g_b||^2 back to the feature rows.
    w_xx = d_dxx + d_dxx.T
    g_fx = 2.0 * (w_xx.sum(axis=1)[:, None] * fx - w_xx @ fx)
    w_yy = d_dyy + d_dyy.T
    g_fy = 2.0 * (w_yy.sum(axis=1)[:, None] * fy - w_yy @ fy)
    g_fx += 2.0 * (d_dxy.sum(axis=1)[:, None] * fx - d_dxy @ fy)
    g_fy += 2.0 * (d_dxy.sum(axis=0)[:, None] * fy - d_dxy.T @ fx)

    gx = project_batch_backward(g_fx.reshape(zx.shape), zx, cache_x, params)
    gy = project_batch_backward(g_fy.reshape(zy.shape), zy, cache_y, params)
    return PFSGradients(
        w1=gx.w1 + gy.w1,
        b1=gx.b1 + gy.b1,
        w2=gx.w2 + gy.w2,
        b2=gx.b2 + gy.b2,
        log_gamma=float(d_log_gamma),
    )
