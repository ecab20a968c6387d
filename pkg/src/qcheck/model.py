"""Parametric regression families as design-matrix builders.

Models are linear in the parameters: each term maps covariates to one
design column, and the fitted function is design @ beta. The term
vocabulary is a closed set (no expression parser) so model files stay
auditable:

    intercept
    raw COL
    square COL
    product COL1 COL2
    log1p_sumsq COL [COL ...]      # log(1 + sum of squared columns)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError

TERM_KINDS = ("intercept", "raw", "square", "product", "log1p_sumsq")

_ARITY = {"intercept": (0, 0), "raw": (1, 1), "square": (1, 1), "product": (2, 2), "log1p_sumsq": (1, None)}


@dataclass(frozen=True)
class Term:
    kind: str
    cols: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ConfigError(f"unknown term kind {self.kind!r}; expected one of {TERM_KINDS}")
        lo, hi = _ARITY[self.kind]
        if len(self.cols) < lo or (hi is not None and len(self.cols) > hi):
            raise ConfigError(f"term {self.kind!r} takes {lo}{'' if hi == lo else '+'} column(s), got {len(self.cols)}")
        object.__setattr__(self, "cols", tuple(self.cols))

    def label(self) -> str:
        return self.kind if not self.cols else f"{self.kind}({','.join(self.cols)})"


@dataclass(frozen=True)
class ModelSpec:
    """Ordered term list; term order fixes coefficient order."""

    terms: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if len(self.terms) < 1:
            raise ConfigError("a model needs at least one term")

    @property
    def p(self) -> int:
        return len(self.terms)

    def term_labels(self) -> tuple[str, ...]:
        return tuple(t.label() for t in self.terms)

    def intercept_mask(self) -> np.ndarray:
        """Boolean mask over design columns marking intercept terms."""
        return np.array([t.kind == "intercept" for t in self.terms])


@dataclass(frozen=True)
class CoefVector:
    """A coefficient vector tied to the quantile level it was fitted at."""

    beta: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie strictly inside (0, 1), got {self.tau}")


def _parse_term(text: str) -> Term:
    parts = text.split()
    if not parts:
        raise ConfigError("empty model term")
    return Term(parts[0], tuple(parts[1:]))


def parse_model_inline(text: str) -> ModelSpec:
    """Parse a comma-separated term list, e.g. 'intercept,raw w,raw x1'."""
    chunks = [c.strip() for c in text.split(",") if c.strip()]
    if not chunks:
        raise ConfigError("empty model specification")
    return ModelSpec(tuple(_parse_term(c) for c in chunks))


def load_model_file(path) -> ModelSpec:
    """Parse a model file with one term per line; '#' starts a comment."""
    terms = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                terms.append(_parse_term(line))
    if not terms:
        raise ConfigError(f"{path}: no terms found")
    return ModelSpec(tuple(terms))


def design_matrix(spec: ModelSpec, d: Dataset) -> np.ndarray:
    """Evaluate each term rowwise; column j is term j."""
    n = d.n
    cols = []
    for term in spec.terms:
        if term.kind == "intercept":
            cols.append(np.ones(n))
        elif term.kind == "raw":
            cols.append(d.column(term.cols[0]).astype(float))
        elif term.kind == "square":
            cols.append(d.column(term.cols[0]) ** 2)
        elif term.kind == "product":
            cols.append(d.column(term.cols[0]) * d.column(term.cols[1]))
        elif term.kind == "log1p_sumsq":
            acc = np.zeros(n)
            for c in term.cols:
                acc += d.column(c) ** 2
            cols.append(np.log1p(acc))
        else:  # pragma: no cover - Term.__post_init__ rejects these
            raise ConfigError(f"unknown term kind {term.kind!r}")
    return np.column_stack(cols)


def predict(spec: ModelSpec, coef: CoefVector, d: Dataset) -> np.ndarray:
    """Fitted values design_matrix(spec, d) @ beta."""
    X = design_matrix(spec, d)
    if X.shape[1] != len(coef.beta):
        raise ConfigError(
            f"coefficient length {len(coef.beta)} does not match model with p={spec.p}"
        )
    return X @ coef.beta
