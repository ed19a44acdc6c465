"""Synthetic dyadic data and Monte Carlo experiments.

Networks are built from i.i.d. unit features through pairwise-average
kernels ``alpha(r, r') = (r + r') / sqrt(2)``. Three feature laws have closed
form reference distributions:

``setting1``
    ``U ~ Unif[0, 2 pi]``, ``(R, S) = (sqrt(2) sin U, sqrt(2) cos U)``.
    Uncorrelated but dependent; unstudentized QAP is conservative.
``setting2``
    ``U ~ Unif[-2 pi, 2 pi]``, ``R = sinh(3U) / c``, ``S = sqrt(2) cos U``.
    Uncorrelated with heavy-tailed ``RS``; unstudentized QAP is
    anti-conservative.
``iid-normal``
    ``(R, S)`` bivariate normal with correlation ``rho``.

``mrqap`` draws ``(T, S)`` bivariate normal with correlation ``rho_st``,
``R = T Z`` with ``Z`` standard normal, and sets
``a_ij = theta0 + theta1 b_ij + varrho c_ij + eps(R_i, R_j) + zeta_ij``.

Every dataset comes from its own Philox stream keyed by ``(seed, index)``,
disjoint from the permutation streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .dyad import new_dyad_matrix
from .exceptions import NoClosedFormError, UnknownSpecError
from .permutation import (
    MRQAPContext,
    Mode,
    QAPContext,
    Strategy,
    mrqap_alternative,
    permutation_batches,
    two_sided_pvalue,
    upper_pvalue,
)
from .regress import DyadDesign, make_design
from .rng import data_generator

QAP_MODELS = ("setting1", "setting2", "iid-normal")
MODELS = QAP_MODELS + ("mrqap", "custom")
HYPOTHESES = ("weak", "strong")
DEFAULT_ALPHAS = (0.01, 0.05, 0.10)

_SETTING2_SCALE = math.sqrt(math.sinh(12 * math.pi) / (24 * math.pi) - 0.5)


def pairwise_average(x: np.ndarray) -> np.ndarray:
    """``(x_i + x_j) / sqrt(2)`` off the diagonal, zero on it."""
    out = (x[:, None] + x[None, :]) / math.sqrt(2.0)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True)
class KernelSpec:
    """A feature law plus the kernels that turn features into networks.

    ``independent=True`` draws ``R`` and ``S`` from two independent copies of
    the feature law (the strong null). For ``model="custom"``, ``features``
    maps ``(rng, n)`` to ``(R, S)`` and ``alpha``/``beta`` are vectorized
    kernels ``f(r_i, r_j)``; they default to the pairwise average.
    """

    model: str
    params: Mapping = field(default_factory=dict)
    independent: bool = False
    features: Optional[Callable] = None
    alpha: Optional[Callable] = None
    beta: Optional[Callable] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise UnknownSpecError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model == "custom" and self.features is None:
            raise UnknownSpecError("a custom spec needs a features callable")
        object.__setattr__(self, "params", dict(self.params))

    @property
    def kind(self) -> str:
        if self.model == "custom" and (self.alpha is not None or self.beta is not None):
            return "custom"
        return "pairwise-average"

    def param(self, name, default):
        return self.params.get(name, default)


def kernel_spec(spec) -> KernelSpec:
    """Coerce a model name, a mapping ``{"model": ..., **params}`` or a spec."""
    if isinstance(spec, KernelSpec):
        return spec
    if isinstance(spec, str):
        return KernelSpec(spec)
    if isinstance(spec, Mapping):
        spec = dict(spec)
        model = spec.pop("model", None)
        if model is None:
            raise UnknownSpecError("spec mapping needs a 'model' key")
        independent = bool(spec.pop("independent", False))
        return KernelSpec(str(model), spec, independent)
    raise UnknownSpecError(f"cannot interpret {spec!r} as a kernel spec")


def _draw_features(spec: KernelSpec, rng: np.random.Generator, n: int):
    if spec.model == "setting1":
        u = rng.uniform(0.0, 2 * math.pi, size=n)
        return math.sqrt(2.0) * np.sin(u), math.sqrt(2.0) * np.cos(u)
    if spec.model == "setting2":
        u = rng.uniform(-2 * math.pi, 2 * math.pi, size=n)
        return np.sinh(3 * u) / _SETTING2_SCALE, math.sqrt(2.0) * np.cos(u)
    if spec.model == "iid-normal":
        rho = float(spec.param("rho", 0.0))
        x = rng.standard_normal((2, n))
        return x[0], rho * x[0] + math.sqrt(1 - rho * rho) * x[1]
    if spec.model == "custom":
        r, s = spec.features(rng, n)
        return np.asarray(r, dtype=float), np.asarray(s, dtype=float)
    raise UnknownSpecError(f"model {spec.model!r} does not generate a pair")


def _kernel_matrix(kernel, x):
    if kernel is None:
        return pairwise_average(x)
    out = np.asarray(kernel(x[:, None], x[None, :]), dtype=float)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return out


def generate_features(spec, n: int, seed: int, index: int = 0):
    """Unit features ``(R, S)`` used by :func:`generate_dyadic_pair`."""
    spec = kernel_spec(spec)
    rng = data_generator(seed, index)
    r, s = _draw_features(spec, rng, n)
    if spec.independent:
        _, s = _draw_features(spec, rng, n)
    return r, s


def generate_dyadic_pair(spec, n: int, seed: int, index: int = 0):
    """Two networks ``a_ij = alpha(R_i, R_j)`` and ``b_ij = beta(S_i, S_j)``."""
    spec = kernel_spec(spec)
    if n < 3:
        raise ValueError("n must be at least 3")
    r, s = generate_features(spec, n, seed, index)
    return (
        new_dyad_matrix(_kernel_matrix(spec.alpha, r)),
        new_dyad_matrix(_kernel_matrix(spec.beta, s)),
    )


def generate_mrqap_design(
    n: int,
    theta: Sequence[float] = (0.0, 0.0, 1.0),
    seed: int = 0,
    *,
    rho_st: float = 0.5,
    zeta_sd: float = 1.0,
    epsilon_scale: float = 1.0,
    index: int = 0,
) -> DyadDesign:
    """Design with one focal (``B`` from ``S``) and one nuisance (``C`` from ``T``) network.

    ``theta = (theta0, theta1, varrho)``. The default is the weak null
    ``theta1 = 0``; ``rho_st=0`` gives the strong null ``(R, T)`` independent
    of ``S``.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    theta0, theta1, varrho = (float(t) for t in theta)
    rng = data_generator(seed, index)
    x = rng.standard_normal((3, n))
    t = x[0]
    s = rho_st * x[0] + math.sqrt(1.0 - rho_st * rho_st) * x[1]
    r = t * x[2]
    zeta = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    zeta[iu] = rng.standard_normal(iu[0].size)
    zeta = zeta + zeta.T
    b = pairwise_average(s)
    c = pairwise_average(t)
    a = theta0 + theta1 * b + varrho * c + epsilon_scale * pairwise_average(r) + zeta_sd * zeta
    np.fill_diagonal(a, 0.0)
    return make_design(a, [b], [c])


@dataclass(frozen=True)
class ReferenceLaw:
    """``Normal(mean, var)`` or ``ChiSquare(df)``."""

    kind: str
    mean: float = 0.0
    var: float = 1.0
    df: int = 1

    @property
    def dist(self):
        if self.kind == "normal":
            return stats.norm(self.mean, math.sqrt(self.var))
        return stats.chi2(self.df)

    def cdf(self, x):
        return self.dist.cdf(x)

    def rejects(self, x, alpha: float) -> np.ndarray:
        """Whether ``x`` falls in the level-``alpha`` critical region (two-sided for normal)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "normal":
            half = self.dist.ppf(1 - alpha / 2) - self.mean
            return np.abs(x - self.mean) > half
        return x > self.dist.ppf(1 - alpha)


def setting2_variance_quadrature() -> float:
    """``E[(RS)^2]`` for the second setting by adaptive quadrature over ``U``."""
    f = lambda u: 2.0 * (np.sinh(3 * u) * np.cos(u)) ** 2
    pts = np.linspace(0.0, 2 * math.pi, 9)[1:-1]
    val, _ = integrate.quad(f, 0.0, 2 * math.pi, points=pts, limit=500, epsabs=0, epsrel=1e-13)
    return 2 * val / (4 * math.pi) / _SETTING2_SCALE**2


#: Weak-null variance of ``sqrt(n) theta1_hat`` in the default MRQAP design.
MRQAP_WEAK_NULL_VARIANCE = 4.0 / 3.0


def mrqap_null_variance(spec, hypothesis: str = "weak") -> float:
    """Null variance of ``sqrt(n) theta1_hat`` for the MRQAP generator.

    Only the ``epsilon`` kernel has a first-order projection; residualizing
    ``S`` on ``T`` leaves ``epsilon_scale**2 E[T^2 Z^2 (S - rho T)^2] / (1 - rho^2)^2
    = epsilon_scale**2 / (1 - rho^2)``. ``zeta`` is degenerate and drops out.
    """
    spec = kernel_spec(spec)
    theta = spec.param("theta", (0.0, 0.0, 1.0))
    if float(theta[1]) != 0.0:
        raise NoClosedFormError("the kernel spec does not satisfy the null (theta1 != 0)")
    rho = 0.0 if hypothesis == "strong" else float(spec.param("rho_st", 0.5))
    if not -1.0 < rho < 1.0:
        raise NoClosedFormError("rho_st must lie strictly inside (-1, 1)")
    return float(spec.param("epsilon_scale", 1.0)) ** 2 / (1.0 - rho * rho)


def asymptotic_reference(spec, hypothesis: str = "weak", statistic: str = "plain", p: int = 1) -> ReferenceLaw:
    """Large-``n`` law of a statistic under the null.

    Studentized statistics are ``Normal(0, 1)`` and Wald statistics
    ``ChiSquare(p)`` for any spec. The unstudentized ``sqrt(n) rho_hat`` has
    variance ``E[(RS)^2]`` under the weak null and ``1`` under the strong null.
    """
    if hypothesis not in HYPOTHESES:
        raise ValueError(f"hypothesis must be one of {HYPOTHESES}, got {hypothesis!r}")
    if statistic == "studentized":
        return ReferenceLaw("normal")
    if statistic == "wald":
        return ReferenceLaw("chi2", df=p)
    if statistic not in ("plain", "coef"):
        raise ValueError(f"unknown statistic {statistic!r}")
    spec = kernel_spec(spec)
    if spec.model == "custom":
        raise NoClosedFormError("no closed-form reference for a custom spec")
    if spec.model == "mrqap":
        if statistic != "coef" or p != 1:
            raise NoClosedFormError("only the single-coefficient MRQAP law is tabulated")
        return ReferenceLaw("normal", var=mrqap_null_variance(spec, hypothesis))
    if statistic != "plain":
        raise ValueError("'coef' applies to MRQAP specs; use 'plain' for QAP")
    if hypothesis == "strong" or spec.independent:
        return ReferenceLaw("normal", var=1.0)
    if spec.model == "setting1":
        return ReferenceLaw("normal", var=0.5)
    if spec.model == "setting2":
        return ReferenceLaw("normal", var=setting2_variance_quadrature())
    if float(spec.param("rho", 0.0)) != 0.0:
        raise NoClosedFormError("the kernel spec does not satisfy the null (rho != 0)")
    return ReferenceLaw("normal", var=1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """What to simulate.

    ``law="sampling"`` draws ``datasets`` independent datasets and records
    the observed statistic of each; with ``inner_reps > 0`` every dataset
    also gets a permutation p-value and rejection rates are computed from
    those. ``law="permutation"`` keeps a single dataset and records
    ``inner_reps`` permutation replicates; rejection rates are then the
    fraction of replicates in the reference law's critical region.
    """

    spec: KernelSpec
    n: int
    datasets: int = 1000
    statistic: Optional[str] = None
    strategy: Optional[str] = None
    inner_reps: int = 999
    alphas: tuple = DEFAULT_ALPHAS
    seed: int = 0
    law: str = "sampling"
    hypothesis: str = "weak"
    eta1_correction: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "spec", kernel_spec(self.spec))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.law not in ("sampling", "permutation"):
            raise ValueError(f"law must be 'sampling' or 'permutation', got {self.law!r}")
        if self.hypothesis not in HYPOTHESES:
            raise ValueError(f"hypothesis must be one of {HYPOTHESES}")
        if self.n < 3:
            raise ValueError("n must be at least 3")
        if self.datasets < 1 or self.inner_reps < 0:
            raise ValueError("datasets must be positive and inner_reps non-negative")
        if self.law == "permutation" and self.inner_reps < 1:
            raise ValueError("a permutation-law experiment needs inner_reps >= 1")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        if self.statistic is None:
            object.__setattr__(self, "statistic", "wald" if self.is_mrqap else "studentized")
        if self.is_mrqap:
            if self.statistic not in ("coef", "wald"):
                raise ValueError("MRQAP experiments use statistic 'coef' or 'wald'")
            object.__setattr__(self, "strategy", Strategy(self.strategy or "b").value)
        elif self.statistic not in ("plain", "studentized"):
            raise ValueError("QAP experiments use statistic 'plain' or 'studentized'")

    @property
    def is_mrqap(self) -> bool:
        return self.spec.model == "mrqap"

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "ExperimentConfig":
        known = {
            "spec", "n", "datasets", "statistic", "strategy", "inner_reps",
            "alphas", "seed", "law", "hypothesis", "eta1_correction",
        }
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown experiment keys: {sorted(extra)}")
        if "spec" not in doc or "n" not in doc:
            raise ValueError("experiment config needs 'spec' and 'n'")
        kwargs = dict(doc)
        for key in ("n", "datasets", "inner_reps", "seed"):
            if key in kwargs:
                v = kwargs[key]
                if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                    raise ValueError(f"{key} must be an integer")
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class ExperimentSummary:
    n: int
    reps: int
    statistic: str
    law: str
    statistic_samples: np.ndarray
    reference: ReferenceLaw
    ks_distance: float
    rejection_rate_at: dict
    pvalues: Optional[np.ndarray] = None
    config: Optional[ExperimentConfig] = None

    def rejection_rate(self, alpha: float) -> float:
        return self.rejection_rate_at[float(alpha)]


def ks_distance(samples, reference: ReferenceLaw) -> float:
    """Two-sided sup distance between the empirical CDF and the reference CDF."""
    return float(stats.kstest(np.asarray(samples, dtype=float), reference.cdf).statistic)


def _dataset_context(config: ExperimentConfig, index: int):
    spec = config.spec
    if config.is_mrqap:
        theta = spec.param("theta", (0.0, 0.0, 1.0))
        rho_st = 0.0 if config.hypothesis == "strong" else float(spec.param("rho_st", 0.5))
        design = generate_mrqap_design(
            config.n, theta, config.seed, index=index, rho_st=rho_st,
            zeta_sd=float(spec.param("zeta_sd", 1.0)),
            epsilon_scale=float(spec.param("epsilon_scale", 1.0)),
        )
        return MRQAPContext(design, config.strategy, config.eta1_correction)
    if config.hypothesis == "strong" and not spec.independent:
        spec = replace(spec, independent=True)
    a, b = generate_dyadic_pair(spec, config.n, config.seed, index)
    return QAPContext(a, b, config.eta1_correction)


def _statistic_names(config: ExperimentConfig):
    return ("coef", "wald") if config.is_mrqap else ("plain", "studentized")


def _pvalue(config, name, observed, reps, add_one):
    if config.is_mrqap and mrqap_alternative(name, 1) == "greater":
        return upper_pvalue(observed, reps, add_one=add_one)
    return two_sided_pvalue(observed, reps, add_one=add_one)


def _summaries(config: ExperimentConfig, names) -> dict:
    samples = {k: [] for k in names}
    pvals = {k: [] for k in names}
    with_p = config.law == "sampling" and config.inner_reps > 0
    if config.law == "permutation":
        ctx = _dataset_context(config, 0)
        _, _, batches = permutation_batches(config.n, config.inner_reps, config.seed, index=0)
        for perms in batches:
            for k, v in ctx.evaluate(perms).items():
                if k in samples:
                    samples[k].append(v)
        samples = {k: np.concatenate(v) for k, v in samples.items()}
    else:
        for d in range(config.datasets):
            ctx = _dataset_context(config, d)
            obs = ctx.observed()
            for k in names:
                samples[k].append(obs[k])
            if with_p:
                mode, _, batches = permutation_batches(config.n, config.inner_reps, config.seed, index=d)
                reps = {k: [] for k in names}
                for perms in batches:
                    for k, v in ctx.evaluate(perms).items():
                        if k in reps:
                            reps[k].append(v)
                for k in names:
                    pvals[k].append(
                        _pvalue(config, k, obs[k], np.concatenate(reps[k]), mode is Mode.MONTE_CARLO)
                    )
        samples = {k: np.asarray(v, dtype=float) for k, v in samples.items()}
    out = {}
    for k in names:
        ref = asymptotic_reference(config.spec, config.hypothesis, k, 1)
        x = samples[k]
        if with_p:
            pv = np.asarray(pvals[k])
            rates = {a: float(np.mean(pv <= a)) for a in config.alphas}
        else:
            pv = None
            rates = {a: float(np.mean(ref.rejects(x, a))) for a in config.alphas}
        out[k] = ExperimentSummary(
            config.n, x.size, k, config.law, x, ref, ks_distance(x, ref), rates, pv,
            replace(config, statistic=k),
        )
    return out


def run_experiment(config) -> ExperimentSummary:
    """Run one experiment; ``config`` is an :class:`ExperimentConfig` or a mapping."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_mapping(config)
    return _summaries(config, (config.statistic,))[config.statistic]


def compare_statistics(config) -> dict:
    """Both statistics of the family (unstudentized and studentized) on shared draws.

    Returns a mapping from statistic name to :class:`ExperimentSummary`. The
    datasets and permutations are the same for every entry.
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_mapping(config)
    return _summaries(config, _statistic_names(config))

