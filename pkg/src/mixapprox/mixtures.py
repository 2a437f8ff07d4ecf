"""Finite location-scale mixtures: evaluation, sampling, EM fitting, and
greedy convex-hull approximation over a dictionary of shifted dilated kernels.

A mixture holds simplex weights, means inside a box, and one shared integer
scale.  EM is projected: means are clamped to the box after every M-step,
which preserves the update's argmax property for both supported marginals
(gaussian: weighted mean; laplace: weighted median).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .grids import GridFunction, SupportBox, TensorGrid, convolve, restrict, sample_on_grid
from .kernels import Dilation, ProductKernel, dilate

__all__ = [
    "MeanBox",
    "FiniteMixture",
    "MixingApproximant",
    "MixtureDictionary",
    "EMFit",
    "MLEFit",
    "GreedyFit",
    "mixture_eval",
    "mixture_sample",
    "log_likelihood",
    "em_fit",
    "mle_fit",
    "build_dictionary",
    "greedy_fit",
    "build_mixing_approximant",
]

_EM_MARGINALS = ("gaussian", "laplace")


@dataclass(frozen=True)
class MeanBox:
    """Cube of admissible component means, [m_lower, m_upper]^dim."""

    m_lower: float
    m_upper: float
    dim: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.m_lower) and math.isfinite(self.m_upper)):
            raise ValueError("mean box must be bounded")
        # Zero width is tolerated for the degenerate probe cases of the bound
        # constants; fitting over a degenerate box is pointless but harmless.
        if self.m_lower > self.m_upper:
            raise ValueError("mean box must have nonnegative width")

    @property
    def width(self) -> float:
        return self.m_upper - self.m_lower

    def clamp(self, means: np.ndarray) -> np.ndarray:
        return np.clip(means, self.m_lower, self.m_upper)

    def sample(self, n: int, rng) -> np.ndarray:
        return rng.uniform(self.m_lower, self.m_upper, size=(n, self.dim))

    def as_support_box(self) -> SupportBox:
        return SupportBox((self.m_lower,) * self.dim, (self.m_upper,) * self.dim)


@dataclass(frozen=True, eq=False)
class FiniteMixture:
    """Bounded finite mixture of one dilated product kernel.

    Doubles as the parameter vector of the likelihood: weights, means, and the
    shared scale fully determine the density.
    """

    weights: np.ndarray
    means: np.ndarray
    k: int
    kernel: ProductKernel

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        if m.ndim == 1:
            m = m[:, None]
        if w.ndim != 1 or m.shape[0] != w.shape[0]:
            raise ValueError("weights and means must have matching leading length")
        if m.shape[1] != self.kernel.dim:
            raise ValueError("mean dimension does not match the kernel")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        if int(self.k) < 1:
            raise ValueError("scale k must be a positive integer")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "k", int(self.k))

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    def component_log_pdf(self, x: np.ndarray) -> np.ndarray:
        """Log density of each component at each point, shaped (N, n)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        p = self.dim
        marg = self.kernel.marginal
        if marg.name == "gaussian":
            # Expand the squared distance so the (N, n) matrix comes from one
            # GEMM instead of an (N, n, p) broadcast; EM spends its time here.
            sq = (
                np.sum(x * x, axis=1)[:, None]
                - 2.0 * (x @ self.means.T)
                + np.sum(self.means * self.means, axis=1)[None, :]
            )
            return (
                p * (math.log(self.k) - 0.5 * math.log(2.0 * math.pi))
                - 0.5 * self.k ** 2 * sq
            )
        # (N, n, p) offsets scaled by k.
        z = self.k * (x[:, None, :] - self.means[None, :, :])
        return p * math.log(self.k) + np.sum(marg.log_pdf(z), axis=-1)

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        comp = self.component_log_pdf(x)
        with np.errstate(divide="ignore"):
            logw = np.log(np.maximum(self.weights, 1e-300))
        return logsumexp(comp + logw[None, :], axis=1)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scalar_grid = x.ndim >= 2 and x.shape[-1] == self.dim
        if scalar_grid:
            lead = x.shape[:-1]
            out = np.exp(self.log_pdf(x.reshape(-1, self.dim)))
            return out.reshape(lead)
        return np.exp(self.log_pdf(x))

    def sample(self, n: int, rng) -> np.ndarray:
        comp = rng.choice(self.n, size=n, p=self.weights)
        z = self.kernel.sample(n, rng) / self.k
        if z.ndim == 1:
            z = z[:, None]
        return self.means[comp] + z


def mixture_eval(mix: FiniteMixture, x) -> np.ndarray:
    """Weighted-sum density value(s); log-sum-exp internally."""
    return mix.pdf(x)


def mixture_sample(mix: FiniteMixture, seed, n: int) -> np.ndarray:
    """Draw n points reproducibly from a seed or an existing Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return mix.sample(n, rng)


def log_likelihood(mix: FiniteMixture, xs) -> float:
    """Sum of log mixture densities; -inf when a sample escapes the support."""
    lp = mix.log_pdf(np.asarray(xs, dtype=float))
    if np.any(np.isneginf(lp)):
        return -math.inf
    return float(np.sum(lp))


@dataclass
class EMFit:
    mixture: FiniteMixture
    trace: np.ndarray           # log-likelihood after every iteration
    iterations: int
    converged: bool
    reseeds: int
    dropped: int

    @property
    def log_likelihood(self) -> float:
        return float(self.trace[-1])


def _init_means(xs: np.ndarray, n: int, box: MeanBox, rng) -> np.ndarray:
    if rng is None:
        qs = (np.arange(n) + 0.5) / n
        means = np.quantile(xs, qs, axis=0)
    else:
        means = box.sample(n, rng)
    return box.clamp(means)


def _weighted_median(x: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(x)
    cw = np.cumsum(w[order])
    idx = np.searchsorted(cw, 0.5 * cw[-1])
    return float(x[order][min(idx, len(x) - 1)])


def em_fit(xs, n_components: int, k: int, kernel: ProductKernel, box: MeanBox,
           init_rng=None, max_iters: int = 500, tol: float = 1e-8) -> EMFit:
    """Projected EM for a fixed scale k.

    Parameters
    ----------
    xs : array (N, p) or (N,)
        Sample points.
    n_components : int
        Component count; must not exceed the sample size.
    init_rng : np.random.Generator or None
        None places initial means at sample quantiles (deterministic);
        a generator draws them uniformly in the box.

    The trace of log-likelihood values is nondecreasing within 1e-9 between
    ordinary iterations.  A starving component (weight below 1e-12) is
    re-seeded once, then dropped with a warning; either event may reset the
    trace monotonicity at that single step.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    N = xs.shape[0]
    if N < n_components:
        raise ValueError("need at least as many samples as components")
    if kernel.marginal.name not in _EM_MARGINALS:
        raise ValueError(
            f"EM requires a full-support marginal ({_EM_MARGINALS}), "
            f"got {kernel.marginal.name!r}"
        )

    means = _init_means(xs, n_components, box, init_rng)
    weights = np.full(n_components, 1.0 / n_components)
    mix = FiniteMixture(weights, means, k, kernel)
    reseed_rng = init_rng if init_rng is not None else np.random.default_rng(0)
    reseeded: set = set()
    reseeds = dropped = 0
    gaussian = kernel.marginal.name == "gaussian"

    trace = []
    prev = -math.inf
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        comp = mix.component_log_pdf(xs)
        with np.errstate(divide="ignore"):
            logw = np.log(np.maximum(mix.weights, 1e-300))
        joint = comp + logw[None, :]
        # Inline log-sum-exp so the shifted exponentials are reused for the
        # responsibilities; this is the hot loop of every fit.
        mx = joint.max(axis=1)
        shifted = np.exp(joint - mx[:, None])
        denom = shifted.sum(axis=1)
        ll = float(np.sum(mx + np.log(denom)))
        resp = shifted / denom[:, None]

        counts = resp.sum(axis=0)
        starving = np.where(counts / N < 1e-12)[0]
        if starving.size:
            keep = np.ones(mix.n, dtype=bool)
            new_means = mix.means.copy()
            for idx in starving:
                if idx in reseeded:
                    keep[idx] = False
                    dropped += 1
                    warnings.warn(
                        f"dropping starved mixture component {idx}", RuntimeWarning
                    )
                else:
                    reseeded.add(int(idx))
                    reseeds += 1
                    new_means[idx] = box.sample(1, reseed_rng)[0]
            w = np.where(keep, np.maximum(mix.weights, 1.0 / (10 * N)), 0.0)[keep]
            mix = FiniteMixture(w / w.sum(), new_means[keep], k, kernel)
            trace.append(ll)
            prev = -math.inf  # restart monotonicity after the intervention
            continue

        new_w = counts / N
        if gaussian:
            new_means = (resp.T @ xs) / counts[:, None]
        else:
            new_means = np.empty_like(mix.means)
            for i in range(mix.n):
                for d in range(xs.shape[1]):
                    new_means[i, d] = _weighted_median(xs[:, d], resp[:, i])
        mix = FiniteMixture(new_w / new_w.sum(), box.clamp(new_means), k, kernel)

        trace.append(ll)
        if ll - prev < tol and math.isfinite(prev):
            converged = True
            break
        prev = ll

    final_ll = log_likelihood(mix, xs)
    trace.append(final_ll)
    return EMFit(mix, np.asarray(trace), it, converged, reseeds, dropped)


@dataclass
class MLEFit:
    fit: EMFit
    k: int
    scanned: list               # (k, restart, log-likelihood) triples

    @property
    def mixture(self) -> FiniteMixture:
        return self.fit.mixture

    @property
    def log_likelihood(self) -> float:
        return self.fit.log_likelihood


def mle_fit(xs, n_components: int, k_grid, kernel: ProductKernel, box: MeanBox,
            restarts: int = 1, seed: int = 0, max_iters: int = 500,
            tol: float = 1e-8) -> MLEFit:
    """Best projected-EM fit over an integer scale grid and random restarts.

    Restart 0 uses the deterministic quantile initialization; later restarts
    draw initial means from streams derived from (seed, scale index, restart),
    so the result is a pure function of its arguments.
    """
    k_grid = tuple(int(k) for k in k_grid)
    if not k_grid:
        raise ValueError("k_grid must be nonempty")
    if restarts < 1:
        raise ValueError("need at least one restart")
    best = None
    scanned = []
    for ki, k in enumerate(k_grid):
        for r in range(restarts):
            if r == 0:
                rng = None
            else:
                rng = np.random.default_rng(
                    np.random.SeedSequence(entropy=seed, spawn_key=(ki, r))
                )
            fit = em_fit(xs, n_components, k, kernel, box,
                         init_rng=rng, max_iters=max_iters, tol=tol)
            scanned.append((k, r, fit.log_likelihood))
            if best is None or fit.log_likelihood > best[0].log_likelihood:
                best = (fit, k)
    return MLEFit(best[0], best[1], scanned)


@dataclass(frozen=True, eq=False)
class MixtureDictionary:
    """Finite dictionary of dilated kernels with means on a lattice."""

    kernel: ProductKernel
    k: int
    means: np.ndarray           # (M, p)
    grid: TensorGrid
    values: np.ndarray          # (M, G) element values at the grid nodes

    @property
    def size(self) -> int:
        return int(self.means.shape[0])

    def element(self, idx: int) -> np.ndarray:
        return self.values[idx]

    def evaluate_at(self, points: np.ndarray) -> np.ndarray:
        """Element values at arbitrary points, shaped (M, N)."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        p = self.kernel.dim
        z = self.k * (points[None, :, :] - self.means[:, None, :])
        logs = self.kernel.marginal.log_pdf(z).sum(axis=-1)
        return np.exp(p * math.log(self.k) + logs)


def build_dictionary(kernel: ProductKernel, k: int, box: MeanBox,
                     means_per_axis: int, grid: TensorGrid) -> MixtureDictionary:
    """Dictionary over a means lattice; capped at 10^4 elements."""
    axes = [np.linspace(box.m_lower, box.m_upper, means_per_axis)] * kernel.dim
    means = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, kernel.dim)
    if means.shape[0] > 10_000:
        raise ValueError("dictionary exceeds 10^4 mean points")
    if means.shape[0] * np.prod(grid.shape) > 2e7:
        raise ValueError("dictionary value table would exceed the memory guard")
    mesh = grid.mesh().reshape(-1, kernel.dim)
    dil = Dilation(kernel, int(k))
    vals = np.empty((means.shape[0], mesh.shape[0]))
    for i, m in enumerate(means):
        vals[i] = dil.pdf(mesh - m)
    return MixtureDictionary(kernel, int(k), means, grid, vals)


def _golden_section(fn, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Minimize a unimodal scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


@dataclass
class GreedyFit:
    """Iterate sequence of a greedy convex-combination fit."""

    mixtures: list              # FiniteMixture per iterate, 1..n_max
    objectives: np.ndarray      # objective value per iterate
    selected: list              # dictionary index added per iterate
    lambdas: list               # convex step size per iterate
    objective: str


def greedy_fit(target: GridFunction, dictionary: MixtureDictionary,
               n_max: int, objective: str = "l2") -> GreedyFit:
    """Greedy convex-hull approximation of a grid density.

    Each iterate adds one dictionary element with a convex step
    pi <- (1 - lambda) pi + lambda e_new; lambda comes from a golden-section
    line search on [0, 1].  For the squared-L2 objective the element is chosen
    by exact vectorized minimization over the dictionary; for KL the element
    maximizes the linearized gain, which keeps every step nonincreasing.

    Returns one mixture per iterate together with the objective values
    (squared L2 gap, or KL divergence, against the target).
    """
    if dictionary.size == 0:
        raise ValueError("empty dictionary")
    if objective not in ("l2", "kl"):
        raise ValueError("objective must be 'l2' or 'kl'")
    if not target.grid.same_lattice(dictionary.grid):
        raise ValueError("target and dictionary live on different grids")

    t = target.values.ravel()
    W = target.grid.weight_tensor().ravel()
    D = dictionary.values
    DW = D * W[None, :]
    dd = np.einsum("ij,ij->i", DW, D)      # <d, d>_W per element

    weights: dict[int, float] = {}
    v = np.zeros_like(t)
    mixtures, objs, selected, lambdas = [], [], [], []

    if objective == "kl":
        mask = t > 0
        tW = t * W

        def kl_obj(vals):
            if np.any(vals[mask] < 1e-300):
                return math.inf
            return float(np.sum(tW[mask] * (np.log(t[mask]) - np.log(vals[mask]))))

    for step in range(1, n_max + 1):
        if objective == "l2":
            e = v - t
            b = DW @ e - float(np.sum(W * e * v))        # <e, d - v>_W
            c = dd - 2.0 * (DW @ v) + float(np.sum(W * v * v))
            if step == 1:
                lam_cand = np.ones_like(b)
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    lam_cand = np.clip(np.where(c > 0, -b / c, 0.0), 0.0, 1.0)
            base = float(np.sum(W * e * e))
            cand_obj = base + 2.0 * lam_cand * b + lam_cand ** 2 * c
            idx = int(np.argmin(cand_obj))
            d = D[idx]
            if step == 1:
                lam = 1.0
            else:
                diff = d - v

                def fn(l, diff=diff, e=e):
                    r = e + l * diff
                    return float(np.sum(W * r * r))

                lam = _golden_section(fn, 0.0, 1.0)
                if fn(lam) > fn(lam_cand[idx]):
                    lam = float(lam_cand[idx])
        else:
            if step == 1:
                with np.errstate(divide="ignore"):
                    logD = np.log(np.maximum(D, 1e-300))
                scores = logD @ (t * W)
                idx = int(np.argmax(scores))
                d = D[idx]
                lam = 1.0
            else:
                grad_gain = DW @ (t / np.maximum(v, 1e-300))
                idx = int(np.argmax(grad_gain))
                d = D[idx]

                def fn(l, d=d):
                    return kl_obj((1.0 - l) * v + l * d)

                lam = _golden_section(fn, 0.0, 1.0 - 1e-12)

        v = (1.0 - lam) * v + lam * d
        for key in list(weights):
            weights[key] *= (1.0 - lam)
        weights[idx] = weights.get(idx, 0.0) + lam

        idxs = sorted(weights)
        w = np.array([weights[i] for i in idxs])
        mix = FiniteMixture(w / w.sum(), dictionary.means[idxs],
                            dictionary.k, dictionary.kernel)
        mixtures.append(mix)
        selected.append(idx)
        lambdas.append(float(lam))
        if objective == "l2":
            r = v - t
            objs.append(float(np.sum(W * r * r)))
        else:
            objs.append(kl_obj(v))

    return GreedyFit(mixtures, np.asarray(objs), selected, lambdas, objective)


@dataclass(frozen=True, eq=False)
class MixingApproximant:
    """A target smoothed by one dilated kernel, realized on a grid.

    The mixing law over component means is the target density itself; the
    realized grid function is the convolution of the two.
    """

    target: object              # TargetDensity
    kernel: ProductKernel
    k: int
    realized: GridFunction


def build_mixing_approximant(target, kernel: ProductKernel, k: int,
                             grid: TensorGrid) -> MixingApproximant:
    """Convolve a target with the dilated kernel and restrict to the grid box."""
    f_gf = sample_on_grid(target.pdf, grid)
    out = convolve(f_gf, dilate(kernel, int(k)))
    realized = restrict(out, grid.box)
    return MixingApproximant(target, kernel, int(k), realized)
