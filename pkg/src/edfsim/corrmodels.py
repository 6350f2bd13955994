"""Correlation-model zoo and structured matrix representations.

A correlation matrix is carried in one of three representations:

* ``DenseRep`` -- an explicit matrix;
* ``ToeplitzRep`` -- stationary, first row only;
* ``LowRankRep`` -- a * I + B B^T with a >= 0 (sampling and moment
  functionals then cost O(m k) instead of O(m^2)).

Builders validate unit diagonal, symmetry and positive semidefiniteness at
construction.  The PSD check first tries a Cholesky factorization (a cheap
witness); only on failure does it compute the smallest eigenvalue to report
it.  Dense eigen-checks are skipped above ``EIG_CHECK_CAP`` -- the sampler's
jitter escalation is the gate for very large matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .errors import (
    ConfigError,
    DegenerateSampleError,
    DenseCapError,
    NotPositiveSemidefiniteError,
    ParameterError,
)

DENSE_CAP = 20000
EIG_CHECK_CAP = 4096
UNIT_DIAG_TOL = 1e-12
PSD_TOL = 1e-8


@dataclass(frozen=True)
class DenseRep:
    matrix: np.ndarray


@dataclass(frozen=True)
class ToeplitzRep:
    first_row: np.ndarray


@dataclass(frozen=True)
class LowRankRep:
    diag: float  # a in a*I + B B^T
    loadings: np.ndarray  # B, shape (m, k)


Representation = Union[DenseRep, ToeplitzRep, LowRankRep]


@dataclass(frozen=True)
class CorrelationStructure:
    """A validated m x m correlation matrix in structured form.

    ``min_eigenvalue`` is the smallest eigenvalue when the validation path
    had to compute it (boundary or rejected cases); None when PSD was
    witnessed by Cholesky or holds by construction.
    """

    m: int
    rep: Representation
    min_eigenvalue: float | None = None


def _as_square(matrix) -> np.ndarray:
    g = np.array(matrix, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ParameterError("correlation matrix must be square")
    if not np.all(np.isfinite(g)):
        raise ParameterError("correlation matrix must be finite")
    return g


def _psd_min_eig(matrix: np.ndarray) -> float | None:
    """None if Cholesky succeeds (PSD witnessed); else the smallest eigenvalue."""
    try:
        np.linalg.cholesky(matrix)
        return None
    except np.linalg.LinAlgError:
        return float(np.linalg.eigvalsh(matrix)[0])


def _validated_dense(matrix: np.ndarray, check_psd: bool) -> CorrelationStructure:
    g = _as_square(matrix)
    m = g.shape[0]
    if np.max(np.abs(np.diag(g) - 1.0)) > UNIT_DIAG_TOL:
        raise ParameterError(f"diagonal must be 1 within {UNIT_DIAG_TOL}")
    if np.max(np.abs(g - g.T)) > UNIT_DIAG_TOL:
        raise ParameterError("matrix must be symmetric")
    if np.max(np.abs(g)) > 1.0 + 1e-9:
        raise ParameterError("correlation entries must lie in [-1, 1]")
    g = 0.5 * (g + g.T)
    np.fill_diagonal(g, 1.0)
    min_eig = None
    if check_psd and m <= EIG_CHECK_CAP:
        min_eig = _psd_min_eig(g)
        if min_eig is not None and min_eig < -PSD_TOL:
            raise NotPositiveSemidefiniteError(min_eig)
    return CorrelationStructure(m=m, rep=DenseRep(matrix=g), min_eigenvalue=min_eig)


def build_dense(matrix, check_psd: bool = True) -> CorrelationStructure:
    """Wrap and validate an explicit correlation matrix."""
    return _validated_dense(matrix, check_psd)


def _check_m(m: int) -> int:
    if int(m) != m or m < 2:
        raise ParameterError("m must be an integer >= 2")
    return int(m)


def build_sign_factor(m: int, rho: float, signs) -> CorrelationStructure:
    """Gamma = (1 - rho) I + rho xi xi^T for a sign vector xi in {-1, +1}^m."""
    m = _check_m(m)
    xi = np.asarray(signs, dtype=float)
    if xi.shape != (m,) or not np.all(np.abs(xi) == 1.0):
        raise ParameterError("signs must be a length-m vector of +-1")
    rho = float(rho)
    lo = -1.0 / (m - 1)
    if not lo <= rho <= 1.0:
        raise ParameterError(f"rho must lie in [{lo:.6g}, 1] for m={m}")
    if rho >= 0.0:
        b = math.sqrt(rho) * xi.reshape(m, 1)
        return CorrelationStructure(m=m, rep=LowRankRep(diag=1.0 - rho, loadings=b))
    g = rho * np.outer(xi, xi)
    np.fill_diagonal(g, 1.0)
    return _validated_dense(g, check_psd=True)


def build_equi(m: int, rho: float) -> CorrelationStructure:
    """Equicorrelated matrix (1 - rho) I + rho 1 1^T, rho in [-1/(m-1), 1]."""
    return build_sign_factor(m, rho, np.ones(_check_m(m)))


def build_alternate(m: int, rho: float) -> CorrelationStructure:
    """Sign-factor matrix with the alternating vector xi_i = (-1)^(i+1).

    For even m the off-diagonal sum telescopes to -m, so m gamma_m = -rho:
    the matrix carries rho-sized correlations yet is nearly compensated.
    """
    m = _check_m(m)
    xi = np.ones(m)
    xi[1::2] = -1.0
    return build_sign_factor(m, rho, xi)


def _toeplitz_structure(first_row: np.ndarray, check_psd: bool) -> CorrelationStructure:
    m = first_row.shape[0]
    min_eig = None
    if check_psd and m <= EIG_CHECK_CAP:
        min_eig = _psd_min_eig(to_dense(
            CorrelationStructure(m=m, rep=ToeplitzRep(first_row=first_row))
        ))
        if min_eig is not None and min_eig < -PSD_TOL:
            raise NotPositiveSemidefiniteError(min_eig)
    return CorrelationStructure(m=m, rep=ToeplitzRep(first_row=first_row), min_eigenvalue=min_eig)


def build_long_range(m: int, d: float, check_psd: bool = True) -> CorrelationStructure:
    """Stationary power-law model Gamma_ij = |i - j|^-d (d > 0).

    The unit-lag correlation is 1^-d = 1, so for m >= 3 this matrix is never
    positive semidefinite: it is an asymptotic schema, useful for rate
    diagnostics only.  With check_psd=True (default) construction rejects it
    and reports the smallest eigenvalue; pass check_psd=False to build it
    for gamma_m / moment diagnostics.  Sampling from an unchecked structure
    still fails at planning time.
    """
    m = _check_m(m)
    d = float(d)
    if not d > 0.0:
        raise ParameterError("power-law exponent d must be positive")
    row = np.ones(m)
    row[1:] = np.arange(1, m, dtype=float) ** (-d)
    return _toeplitz_structure(row, check_psd)


def build_weak_range(m: int, d: float, rho: float, check_psd: bool = True) -> CorrelationStructure:
    """Damped power-law model Gamma_ij = rho |i - j|^-d off the diagonal."""
    m = _check_m(m)
    d = float(d)
    rho = float(rho)
    if not d > 0.0:
        raise ParameterError("power-law exponent d must be positive")
    if not -1.0 <= rho <= 1.0:
        raise ParameterError("rho must lie in [-1, 1]")
    row = np.ones(m)
    row[1:] = rho * np.arange(1, m, dtype=float) ** (-d)
    return _toeplitz_structure(row, check_psd)


def three_factor_loadings(m: int) -> np.ndarray:
    """Three orthonormal loading columns: constant, alternating, half-split.

    Each column is scaled by 1/sqrt(m); P^T P = I_3 exactly when m is
    divisible by 4.
    """
    m = _check_m(m)
    if m % 4 != 0:
        raise ParameterError("three-pattern loadings need m divisible by 4")
    p = np.empty((m, 3))
    p[:, 0] = 1.0
    p[:, 1] = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    p[:, 2] = np.where(np.arange(m) < m // 2, 1.0, -1.0)
    return p / math.sqrt(m)


def build_factor(
    m: int,
    rho: float,
    weights,
    loadings,
    repair: str = "reject",
) -> CorrelationStructure:
    """Factor model Gamma = (1 - rho) I + rho P H P^T.

    ``weights`` are the factor strengths h_1..h_k (H = diag(h)); ``loadings``
    is the m x k matrix P with orthonormal columns (checked to 1e-10).  A
    valid correlation matrix further needs diag(P H P^T) = 1; when that fails
    (checked to 1e-8), repair="normalize-diagonal" rescales each row of
    P H P^T to unit diagonal (the rescaled loadings are then no longer
    exactly orthonormal), while repair="reject" raises.
    """
    m = _check_m(m)
    rho = float(rho)
    if not 0.0 <= rho <= 1.0:
        raise ParameterError("factor rho must lie in [0, 1]")
    if repair not in ("reject", "normalize-diagonal"):
        raise ParameterError("repair must be 'reject' or 'normalize-diagonal'")
    h = np.asarray(weights, dtype=float)
    if h.ndim != 1 or h.size < 1 or np.any(h < 0.0) or not np.all(np.isfinite(h)):
        raise ParameterError("weights must be non-negative reals")
    p = np.asarray(loadings, dtype=float)
    if p.shape != (m, h.size):
        raise ParameterError(f"loadings must have shape ({m}, {h.size})")
    gram = p.T @ p
    if np.max(np.abs(gram - np.eye(h.size))) > 1e-10:
        raise ParameterError("loading columns must be orthonormal (within 1e-10)")
    diag = (p * p) @ h
    if np.max(np.abs(diag - 1.0)) > 1e-8:
        if repair == "reject":
            raise ParameterError(
                "diag(P H P^T) != 1: weights violate the trace constraint "
                f"(max deviation {np.max(np.abs(diag - 1.0)):.3e}); "
                "use repair='normalize-diagonal' to rescale"
            )
        if np.any(diag <= 0.0):
            raise ParameterError("cannot normalize: diag(P H P^T) has non-positive entries")
        p = p / np.sqrt(diag)[:, None]
    b = math.sqrt(rho) * (p * np.sqrt(h))
    return CorrelationStructure(m=m, rep=LowRankRep(diag=1.0 - rho, loadings=b))


def build_sample_corr(m: int, n: int, rng: np.random.Generator) -> CorrelationStructure:
    """Sample correlation matrix of n i.i.d. standard Gaussian rows in R^m."""
    m = _check_m(m)
    if int(n) != n or n < 2:
        raise ParameterError("n must be an integer >= 2")
    x = rng.standard_normal((int(n), m))
    s = (x.T @ x) / float(n)
    d = np.diag(s)
    if np.any(d <= 0.0):
        raise DegenerateSampleError("zero-variance column in sample correlation; regenerate")
    root = np.sqrt(d)
    g = s / np.outer(root, root)
    g = 0.5 * (g + g.T)
    np.fill_diagonal(g, 1.0)
    # PSD by construction (Gram matrix rescaled); no eigen check needed.
    return CorrelationStructure(m=m, rep=DenseRep(matrix=g))


def to_dense(c: CorrelationStructure, cap: int = DENSE_CAP) -> np.ndarray:
    """Materialize the full matrix; refuses above ``cap`` rows."""
    if c.m > cap:
        raise DenseCapError(f"m={c.m} exceeds the dense materialization cap ({cap})")
    rep = c.rep
    if isinstance(rep, DenseRep):
        return rep.matrix.copy()
    if isinstance(rep, ToeplitzRep):
        idx = np.abs(np.subtract.outer(np.arange(c.m), np.arange(c.m)))
        return rep.first_row[idx]
    if isinstance(rep, LowRankRep):
        g = rep.loadings @ rep.loadings.T
        # diag + row norm is exactly 1 by construction; write it as such
        # rather than accumulating the roundoff of the two-term sum
        np.fill_diagonal(g, 1.0)
        return g
    raise TypeError(f"unknown representation {type(rep).__name__}")


def max_abs_offdiag(c: CorrelationStructure) -> float:
    """max_{i != j} |Gamma_ij|, computed per representation."""
    rep = c.rep
    if isinstance(rep, ToeplitzRep):
        return float(np.max(np.abs(rep.first_row[1:]))) if c.m > 1 else 0.0
    if isinstance(rep, DenseRep):
        g = np.abs(rep.matrix.copy())
        np.fill_diagonal(g, 0.0)
        return float(g.max())
    if isinstance(rep, LowRankRep):
        best = 0.0
        b = rep.loadings
        for start in range(0, c.m, 1024):
            block = b[start : start + 1024] @ b.T
            for i in range(block.shape[0]):
                block[i, start + i] = 0.0
            best = max(best, float(np.max(np.abs(block))))
        return best
    raise TypeError(f"unknown representation {type(rep).__name__}")


# ---------------------------------------------------------------------------
# Declarative model specs (JSON-serializable)

FAMILIES = (
    "equi",
    "alternate",
    "sign_factor",
    "long_range",
    "weak_range",
    "factor",
    "sample_corr",
)

_PARAM_KEYS = {
    "equi": {"rho"},
    "alternate": {"rho"},
    "sign_factor": {"rho", "signs"},
    "long_range": {"d"},
    "weak_range": {"d", "rho"},
    "factor": {"rho", "weight_fractions", "loadings", "repair"},
    "sample_corr": {"n", "seed"},
}


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a correlation model at a given size.

    Scalar parameters (rho, n) may instead be power-law rules
    ``{"coef": c, "exponent": e}`` meaning c * m^e, so the same spec can be
    re-realized across an m-grid for trend diagnostics.
    """

    family: str
    m: int
    params: dict = field(default_factory=dict)

    def with_m(self, m: int) -> "ModelSpec":
        return replace(self, m=int(m))


def _is_rule(value) -> bool:
    return isinstance(value, dict)


def _check_rule(name: str, value):
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number or a coef/exponent rule")
    if isinstance(value, (int, float)):
        return
    if isinstance(value, dict):
        extra = set(value) - {"coef", "exponent"}
        if extra or set(value) != {"coef", "exponent"}:
            raise ConfigError(f"{name} rule must have exactly the keys 'coef' and 'exponent'")
        for k in ("coef", "exponent"):
            if not isinstance(value[k], (int, float)) or isinstance(value[k], bool):
                raise ConfigError(f"{name} rule field '{k}' must be a number")
        return
    raise ConfigError(f"{name} must be a number or a coef/exponent rule")


def resolve_rule(value, m: int) -> float:
    """A plain number passes through; a rule dict evaluates coef * m^exponent."""
    if _is_rule(value):
        return float(value["coef"]) * float(m) ** float(value["exponent"])
    return float(value)


def model_spec(family: str, m: int, **params) -> ModelSpec:
    """Validated ModelSpec constructor (same checks as the JSON loader)."""
    return spec_from_json_dict({"family": family, "m": m, **params})


def spec_to_json_dict(spec: ModelSpec) -> dict:
    out = {"family": spec.family, "m": spec.m}
    for key, value in spec.params.items():
        if isinstance(value, np.ndarray):
            value = value.tolist()
        out[key] = value
    return out


def spec_from_json_dict(data: dict) -> ModelSpec:
    if not isinstance(data, dict):
        raise ConfigError("model spec must be a JSON object")
    if "family" not in data:
        raise ConfigError("model spec is missing the 'family' field")
    family = data["family"]
    if family not in FAMILIES:
        raise ConfigError(f"unknown model family {family!r}; expected one of {FAMILIES}")
    if "m" not in data:
        raise ConfigError("model spec is missing the 'm' field")
    m = data["m"]
    if isinstance(m, bool) or not isinstance(m, int) or m < 2:
        raise ConfigError("'m' must be an integer >= 2")
    params = {k: v for k, v in data.items() if k not in ("family", "m")}
    allowed = _PARAM_KEYS[family]
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unexpected fields for family {family!r}: {sorted(extra)}")

    if family in ("equi", "alternate", "sign_factor", "weak_range", "factor"):
        if "rho" not in params:
            raise ConfigError(f"family {family!r} requires 'rho'")
        _check_rule("rho", params["rho"])
    if family in ("long_range", "weak_range"):
        if "d" not in params:
            raise ConfigError(f"family {family!r} requires 'd'")
        if not isinstance(params["d"], (int, float)) or isinstance(params["d"], bool):
            raise ConfigError("'d' must be a number")
    if family == "sign_factor":
        signs = params.get("signs", "alternating")
        if signs != "alternating":
            if not isinstance(signs, list) or any(v not in (-1, 1) for v in signs):
                raise ConfigError("'signs' must be 'alternating' or a list of +-1")
        params["signs"] = signs
    if family == "factor":
        wf = params.get("weight_fractions")
        if not isinstance(wf, list) or not wf or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 for v in wf
        ):
            raise ConfigError("'weight_fractions' must be a non-empty list of non-negative numbers")
        loadings = params.get("loadings", "three-pattern")
        if loadings != "three-pattern" and not isinstance(loadings, list):
            raise ConfigError("'loadings' must be 'three-pattern' or a nested list")
        if loadings == "three-pattern" and len(wf) != 3:
            raise ConfigError("'three-pattern' loadings require exactly 3 weight fractions")
        params["loadings"] = loadings
        repair = params.get("repair", "reject")
        if repair not in ("reject", "normalize-diagonal"):
            raise ConfigError("'repair' must be 'reject' or 'normalize-diagonal'")
        params["repair"] = repair
    if family == "sample_corr":
        if "n" not in params:
            raise ConfigError("family 'sample_corr' requires 'n'")
        _check_rule("n", params["n"])
        seed = params.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("'seed' must be a non-negative integer")
        params["seed"] = seed

    return ModelSpec(family=family, m=m, params=params)


def build_from_spec(spec: ModelSpec, check_psd: bool = True) -> CorrelationStructure:
    """Realize a ModelSpec at its size m (resolving any parameter rules)."""
    m = spec.m
    p = spec.params
    if spec.family == "equi":
        return build_equi(m, resolve_rule(p["rho"], m))
    if spec.family == "alternate":
        return build_alternate(m, resolve_rule(p["rho"], m))
    if spec.family == "sign_factor":
        signs = p.get("signs", "alternating")
        if signs == "alternating":
            xi = np.ones(m)
            xi[1::2] = -1.0
        else:
            xi = np.asarray(signs, dtype=float)
        return build_sign_factor(m, resolve_rule(p["rho"], m), xi)
    if spec.family == "long_range":
        return build_long_range(m, float(p["d"]), check_psd=check_psd)
    if spec.family == "weak_range":
        return build_weak_range(m, float(p["d"]), resolve_rule(p["rho"], m), check_psd=check_psd)
    if spec.family == "factor":
        fractions = np.asarray(p["weight_fractions"], dtype=float)
        loadings = p.get("loadings", "three-pattern")
        if loadings == "three-pattern":
            pmat = three_factor_loadings(m)
        else:
            pmat = np.asarray(loadings, dtype=float)
        return build_factor(
            m,
            resolve_rule(p["rho"], m),
            weights=fractions * m,
            loadings=pmat,
            repair=p.get("repair", "reject"),
        )
    if spec.family == "sample_corr":
        n = int(round(resolve_rule(p["n"], m)))
        seed = int(p.get("seed", 0))
        key = np.array([seed, m], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        return build_sample_corr(m, max(2, n), rng)
    raise ConfigError(f"unknown model family {spec.family!r}")
