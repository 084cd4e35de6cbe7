"""Domain types: parameter points, Fisher matrices and hierarchical models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from ..errors import DomainError, NonPositiveInformation, SamplerError

METHODS = ("analytic", "quadrature", "finite_difference", "monte_carlo")
SIMPLEX_TOL = 1e-12
PSD_REL_TOL = 1e-8


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Domain:
    """Parameter domain: a product of open intervals, or the open simplex.

    For the simplex the point stores the full weight vector
    ``(t0, t1, ..., tp)`` while Fisher matrices are expressed in the free
    coordinates ``(t1, ..., tp)``.
    """

    bounds: tuple = ()
    simplex: bool = False

    @classmethod
    def positive(cls, n=1):
        return cls(bounds=((0.0, math.inf),) * n)

    @classmethod
    def interval(cls, lo, hi):
        return cls(bounds=((float(lo), float(hi)),))

    @classmethod
    def open_simplex(cls):
        return cls(simplex=True)

    def validate(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DomainError("parameter values must be a non-empty vector")
        if not np.all(np.isfinite(values)):
            raise DomainError(f"non-finite parameter value {values.tolist()}")
        if self.simplex:
            if values.size < 2:
                raise DomainError("simplex points need at least two weights")
            if np.any(values <= 0):
                raise DomainError(f"simplex weights must be strictly positive: {values.tolist()}")
            if abs(values.sum() - 1.0) > SIMPLEX_TOL:
                raise DomainError(f"simplex weights sum to {values.sum()!r}, not 1")
        else:
            if len(self.bounds) != values.size:
                raise DomainError(
                    f"expected {len(self.bounds)} coordinates, got {values.size}"
                )
            for i, (v, (lo, hi)) in enumerate(zip(values, self.bounds)):
                if not (lo < v < hi):
                    raise DomainError(f"coordinate {i} = {v!r} outside open interval ({lo}, {hi})")
        return values

    def free(self, values):
        values = np.asarray(values, dtype=float)
        return values[1:].copy() if self.simplex else values.copy()

    def from_free(self, free):
        free = np.asarray(free, dtype=float)
        if self.simplex:
            return np.concatenate([[1.0 - free.sum()], free])
        return free.copy()

    def admits_free(self, free):
        free = np.asarray(free, dtype=float)
        if not np.all(np.isfinite(free)):
            return False
        if self.simplex:
            return bool(np.all(free > 0) and free.sum() < 1.0)
        return all(lo < v < hi for v, (lo, hi) in zip(free, self.bounds))


@dataclass(frozen=True, eq=False)
class ParamPoint:
    """A validated point theta of a parameter domain."""

    values: np.ndarray
    domain: Domain = field(default_factory=Domain.positive)

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.domain.validate(self.values)))

    @property
    def free(self):
        return self.domain.free(self.values)

    @property
    def dim(self):
        return self.free.size

    def with_free(self, free):
        return ParamPoint(self.domain.from_free(free), self.domain)

    def __repr__(self):
        return f"ParamPoint({self.values.tolist()})"


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """Symmetric positive semi-definite information matrix.

    ``stderr`` holds entrywise Monte Carlo (or quadrature) error estimates.
    The PSD check allows ``1e-8`` of the largest eigenvalue magnitude plus
    three times the spectral size of ``stderr``.
    """

    entries: np.ndarray
    stderr: Optional[np.ndarray] = None
    method: str = "analytic"
    flags: tuple = ()

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"Fisher matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NonPositiveInformation(f"non-finite Fisher entries {a.tolist()}")
        a = 0.5 * (a + a.T)
        se = None
        if self.stderr is not None:
            se = np.atleast_2d(np.asarray(self.stderr, dtype=float))
            if se.shape != a.shape or np.any(se < 0) or not np.all(np.isfinite(se)):
                raise ValueError("stderr must be a finite non-negative matrix of matching shape")
            se = 0.5 * (se + se.T)
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        eig = np.linalg.eigvalsh(a)
        floor = -PSD_REL_TOL * np.max(np.abs(eig)) - 3.0 * _spectral_size(se)
        if eig.min() < floor:
            raise NonPositiveInformation(
                f"Fisher matrix has eigenvalue {eig.min():.6g} below {floor:.3g}",
                eigenvalue=float(eig.min()),
                tolerance=float(-floor),
            )
        object.__setattr__(self, "entries", _readonly(a))
        object.__setattr__(self, "stderr", None if se is None else _readonly(se))
        object.__setattr__(self, "flags", tuple(self.flags))

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def se(self):
        """Standard errors, zeros when none were recorded."""
        return np.zeros_like(self.entries) if self.stderr is None else self.stderr

    def scalar(self):
        if self.dim != 1:
            raise ValueError("scalar() requires a 1x1 Fisher matrix")
        return float(self.entries[0, 0])

    def det(self):
        return float(np.linalg.det(self.entries)) if self.dim > 1 else float(self.entries[0, 0])

    def det_stderr(self):
        """First-order standard error of det(I) treating entries as independent."""
        if self.stderr is None:
            return 0.0
        if self.dim == 1:
            return float(self.stderr[0, 0])
        a = self.entries
        # d det / dA_ij = cofactor_ij
        cof = np.array(
            [
                [(-1) ** (i + j) * np.linalg.det(np.delete(np.delete(a, i, 0), j, 1)) for j in range(self.dim)]
                for i in range(self.dim)
            ]
        )
        return float(np.sqrt(np.sum((cof * self.stderr) ** 2)))

    def with_flags(self, *flags):
        return FisherMatrix(self.entries, self.stderr, self.method, self.flags + tuple(flags))

    def to_dict(self):
        return {
            "entries": self.entries.tolist(),
            "stderr": None if self.stderr is None else self.stderr.tolist(),
            "method": self.method,
            "flags": list(self.flags),
        }


def _spectral_size(se):
    if se is None:
        return 0.0
    return float(np.linalg.norm(se, 2))


def combine_methods(*methods):
    return max(methods, key=METHODS.index)


def zero_fisher(dim):
    return FisherMatrix(np.zeros((dim, dim)), np.zeros((dim, dim)), "analytic")


def add_fisher(a: FisherMatrix, b: FisherMatrix, flags=()):
    """Sum with root-sum-of-squares error propagation."""
    se = np.sqrt(a.se**2 + b.se**2)
    return FisherMatrix(a.entries + b.entries, se, combine_methods(a.method, b.method), flags)


# (x (n, dim), given (n, k), theta_free (d,)) -> (n,)
LogDensity = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
# (rng, given (n, k), theta_free (d,)) -> (n, dim)
Sampler = Callable[[np.random.Generator, np.ndarray, np.ndarray], np.ndarray]
# (given (n, k), theta_free (d,)) -> (n, d, d)
FisherProvider = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ConditionalSpec:
    """One conditional law in a hierarchy.

    ``given`` is the row-stacked concatenation of every variable the law
    conditions on (an ``(n, 0)`` array for the top level).  ``kind`` is one
    of ``"real"``, ``"positive"`` or ``"finite"``; finite laws carry their
    ``support`` as an ``(m, dim)`` array shared by all rows.
    """

    name: str
    dim: int
    logpdf: LogDensity
    sample: Sampler
    depends_on_theta: bool = True
    fisher: Optional[FisherProvider] = None
    kind: str = "real"
    support: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("real", "positive", "finite"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "finite":
            if self.support is None:
                raise ValueError("finite laws need a support array")
            sup = np.asarray(self.support, dtype=float).reshape(-1, self.dim)
            object.__setattr__(self, "support", sup)

    def draw(self, rng, given, theta):
        given = np.asarray(given, dtype=float)
        x = np.asarray(self.sample(rng, given, theta), dtype=float).reshape(len(given), -1)
        if x.shape[1] != self.dim:
            raise SamplerError(f"{self.name}: sampler returned dimension {x.shape[1]}, expected {self.dim}")
        return x


def empty_given(n):
    return np.empty((n, 0))


@dataclass(frozen=True, eq=False)
class HierarchicalModel:
    """Two-level model y | w, theta ~ level1 and w | theta ~ level2.

    Optional closed forms: ``expected_level1_fisher(theta) = E_w[I_y(theta|w)]``,
    ``expected_conditional_fisher(theta) = E_y[I_w(theta|y)]`` and
    ``reference_marginal_fisher(theta) = I_y(theta)``; all take the free
    coordinate vector and return ``(d, d)`` arrays.  ``oracle_exempt``
    explains why the quadrature oracles do not apply, when they do not.
    """

    name: str
    domain: Domain
    theta_dim: int
    latent_dim: int
    obs_dim: int
    level1: ConditionalSpec
    level2: ConditionalSpec
    complete_conditional: ConditionalSpec
    marginal: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    expected_level1_fisher: Optional[Callable[[np.ndarray], np.ndarray]] = None
    expected_conditional_fisher: Optional[Callable[[np.ndarray], np.ndarray]] = None
    reference_marginal_fisher: Optional[Callable[[np.ndarray], np.ndarray]] = None
    check_thetas: Sequence = ()
    params: Mapping = field(default_factory=dict)
    oracle_exempt: Optional[str] = None

    def __post_init__(self):
        if self.level2.dim != self.latent_dim or self.complete_conditional.dim != self.latent_dim:
            raise ValueError(f"{self.name}: latent dimensions disagree with latent_dim={self.latent_dim}")
        if self.level1.dim != self.obs_dim:
            raise ValueError(f"{self.name}: level1 dimension disagrees with obs_dim={self.obs_dim}")
        if self.check_thetas:
            self._spot_check()

    def point(self, values):
        return ParamPoint(np.atleast_1d(np.asarray(values, dtype=float)), self.domain)

    def _spot_check(self):
        rng = np.random.default_rng(0)
        ta = self.point(self.check_thetas[0]).free
        w = self.level2.draw(rng, empty_given(8), ta)
        y = self.level1.draw(rng, w, ta)
        wc = self.complete_conditional.draw(rng, y, ta)
        if wc.shape != w.shape:
            raise SamplerError(f"{self.name}: complete conditional sampler has wrong shape")
        if not self.level1.depends_on_theta and len(self.check_thetas) > 1:
            tb = self.point(self.check_thetas[1]).free
            la = self.level1.logpdf(y, w, ta)
            lb = self.level1.logpdf(y, w, tb)
            if np.max(np.abs(la - lb)) > 1e-12:
                raise ValueError(f"{self.name}: level1 flagged theta-free but its log density moves with theta")


@dataclass(frozen=True, eq=False)
class DecompositionReport:
    """All Fisher components at one theta plus the identity bookkeeping."""

    theta: ParamPoint
    i_w: FisherMatrix
    e_iw_given_y: FisherMatrix
    e_iy_given_w: FisherMatrix
    i_complete: FisherMatrix
    i_marginal: FisherMatrix
    estimator_config_echo: object
    fast_path: bool = False
    residuals: Mapping = field(default_factory=dict)
    violations: tuple = ()
    reference: Optional[FisherMatrix] = None

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        from dataclasses import asdict

        return {
            "theta": self.theta.values.tolist(),
            "i_w": self.i_w.to_dict(),
            "e_iw_given_y": self.e_iw_given_y.to_dict(),
            "e_iy_given_w": self.e_iy_given_w.to_dict(),
            "i_complete": self.i_complete.to_dict(),
            "i_marginal": self.i_marginal.to_dict(),
            "reference_i_marginal": None if self.reference is None else self.reference.to_dict(),
            "fast_path": self.fast_path,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "violations": list(self.violations),
            "estimator_config": asdict(self.estimator_config_echo),
        }
