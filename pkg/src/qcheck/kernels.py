"""Kernel and weight functions plus the bandwidth rule.

Every univariate kernel here is a bounded symmetric density with an
(almost everywhere) positive Fourier transform, which is what makes
the pairwise statistic a valid lack-of-fit discrepancy. The default is
the triangular density rescaled to variance one; its transform is a
squared sinc. The multivariate weight is a product of standard normal
densities, so it inherits positivity of the transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SQRT6 = math.sqrt(6.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

K_FAMILIES = ("triangle_var1", "gaussian", "laplace", "logistic")
PSI_FAMILIES = ("gaussian_product",)
BANDWIDTH_EXPONENT = -0.2

DEFAULT_C_GRID = (0.5, 1.0, 2.0, 4.0)


def triangle_var1(u):
    """Triangular density on [-sqrt(6), sqrt(6)], which has variance one."""
    u = np.asarray(u, dtype=float)
    return np.maximum(0.0, 1.0 - np.abs(u) / SQRT6) / SQRT6


def gaussian(u):
    u = np.asarray(u, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * u * u)


def laplace(u):
    u = np.asarray(u, dtype=float)
    return 0.5 * np.exp(-np.abs(u))


def logistic(u):
    u = np.asarray(u, dtype=float)
    e = np.exp(-np.abs(u))
    return e / (1.0 + e) ** 2


_K_TABLE = {
    "triangle_var1": triangle_var1,
    "gaussian": gaussian,
    "laplace": laplace,
    "logistic": logistic,
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, weight family, and the bandwidth constant c in h = c * n^(-1/5)."""

    k_family: str = "triangle_var1"
    psi_family: str = "gaussian_product"
    c: float = 1.0

    def __post_init__(self):
        if self.k_family not in K_FAMILIES:
            raise ConfigError(f"unknown kernel family {self.k_family!r}; expected one of {K_FAMILIES}")
        if self.psi_family not in PSI_FAMILIES:
            raise ConfigError(f"unknown psi family {self.psi_family!r}; expected one of {PSI_FAMILIES}")
        if not self.c > 0:
            raise ConfigError(f"bandwidth constant c must be positive, got {self.c}")


def k_eval(spec: KernelSpec, u):
    """Evaluate the univariate kernel K at u (scalar or array)."""
    return _K_TABLE[spec.k_family](u)


def psi_eval(spec: KernelSpec, dx):
    """Evaluate the multivariate weight psi at a difference vector dx.

    gaussian_product: product over coordinates of the standard normal
    density. An empty dx (no remaining covariates) gives the empty
    product, 1.
    """
    dx = np.atleast_1d(np.asarray(dx, dtype=float))
    out = 1.0
    for v in dx:
        out = out * (_INV_SQRT_2PI * math.exp(-0.5 * v * v))
    return out


def bandwidth(spec: KernelSpec, n: int) -> float:
    """h = c * n^(-1/5)."""
    if n < 2:
        raise ConfigError(f"bandwidth rule needs n >= 2, got {n}")
    return spec.c * float(n) ** BANDWIDTH_EXPONENT
