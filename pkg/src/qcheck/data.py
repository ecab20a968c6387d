"""Loading, validation, and standardization of observational data.

A `Dataset` holds the response y, a designated continuous smoothing
covariate w, and the remaining covariate columns x (which may be
discrete). Covariates can be standardized to mean 0 / sd 1; the
response is never touched.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, ParseError

BUNDLED_BIRTHWEIGHT = "synth_birthweight.csv"


@dataclass(frozen=True)
class Dataset:
    """Response plus covariates split into the smoothing variable and the rest.

    Invariants (checked at construction): all containers share length
    n >= 2, every value is finite, and w takes at least two distinct
    values. A constant w would make every kernel weight identical and
    the lack-of-fit statistics degenerate.
    """

    y: np.ndarray
    w: np.ndarray
    x: np.ndarray  # shape (n, m); m may be 0
    w_name: str = "w"
    x_names: tuple[str, ...] = ()
    y_name: str = "y"

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        w = np.asarray(self.w, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(len(x), -1) if x.size else x.reshape(len(y), 0)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_names", tuple(self.x_names))
        n = len(y)
        if n < 2:
            raise DataError(f"need at least 2 observations, got {n}")
        if len(w) != n or x.shape[0] != n:
            raise DataError(
                f"length mismatch: y has {n} rows, w has {len(w)}, x has {x.shape[0]}"
            )
        if x.shape[1] != len(self.x_names):
            raise DataError(
                f"x has {x.shape[1]} columns but {len(self.x_names)} names were given"
            )
        for label, arr in ((self.y_name, y), (self.w_name, w)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite value in column {label!r}")
        if x.size and not np.all(np.isfinite(x)):
            bad = np.argwhere(~np.isfinite(x))[0]
            raise DataError(f"non-finite value in column {self.x_names[bad[1]]!r}")
        if np.min(w) == np.max(w):
            raise DataError(f"degenerate W: column {self.w_name!r} is constant")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def m(self) -> int:
        return self.x.shape[1]

    def column(self, name: str) -> np.ndarray:
        """Look up a covariate column by name (the w column included)."""
        if name == self.w_name:
            return self.w
        try:
            j = self.x_names.index(name)
        except ValueError:
            raise ConfigError(
                f"unknown column {name!r}; available: "
                f"{', '.join((self.w_name,) + self.x_names)}"
            ) from None
        return self.x[:, j]

    def covariate_names(self) -> tuple[str, ...]:
        return (self.w_name,) + self.x_names

    def with_response(self, y_new: np.ndarray) -> "Dataset":
        """Same covariates, new response (used by the bootstrap)."""
        return Dataset(y_new, self.w, self.x, self.w_name, self.x_names, self.y_name)


@dataclass(frozen=True)
class StandardizationReport:
    """Affine maps applied per covariate column: value -> (value - mean) / sd."""

    names: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.sds) <= 0):
            raise DataError("standardization recorded a non-positive sd")


def _parse_cell(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"cannot parse cell {text!r} at row {row}, column {column!r}",
            row=row,
            column=column,
        ) from None
    if not np.isfinite(value):
        raise ParseError(
            f"non-finite value {text!r} at row {row}, column {column!r}",
            row=row,
            column=column,
        )
    return value


def load_csv(path, w_column: str, y_column: str = "y") -> Dataset:
    """Read a headed CSV into a Dataset.

    The named w column becomes the smoothing covariate, the y column
    the response, and every other column lands in x in file order.
    Row order is preserved. Cells must parse as finite decimal numbers
    (scientific notation allowed); failures report 1-based data-row and
    column coordinates.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for needed, flag in ((w_column, "w"), (y_column, "y")):
            if needed not in header:
                raise ConfigError(
                    f"{path}: no column named {needed!r} for {flag} "
                    f"(header: {', '.join(header)})"
                )
        if w_column == y_column:
            raise ConfigError("w column and y column must differ")
        rows = []
        for r, raw in enumerate(reader, start=1):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(
                    f"{path}: row {r} has {len(raw)} cells, expected {len(header)}",
                    row=r,
                )
            rows.append([_parse_cell(cell.strip(), r, header[c]) for c, cell in enumerate(raw)])
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(rows)}")
    table = np.asarray(rows, dtype=float)
    iy = header.index(y_column)
    iw = header.index(w_column)
    rest = [j for j in range(len(header)) if j not in (iy, iw)]
    return Dataset(
        y=table[:, iy],
        w=table[:, iw],
        x=table[:, rest] if rest else np.empty((len(rows), 0)),
        w_name=w_column,
        x_names=tuple(header[j] for j in rest),
        y_name=y_column,
    )


def write_csv(d: Dataset, path) -> None:
    """Serialize a Dataset back to CSV at full decimal precision.

    repr() of a float round-trips exactly, so load_csv(write_csv(d))
    reproduces the numeric content bit for bit.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow((d.y_name, d.w_name) + d.x_names)
        for i in range(d.n):
            writer.writerow(
                [repr(float(d.y[i])), repr(float(d.w[i]))]
                + [repr(float(v)) for v in d.x[i]]
            )


def standardize(d: Dataset) -> tuple[Dataset, StandardizationReport]:
    """Standardize every covariate column to sample mean 0 and sd 1 (ddof=1).

    The response is left alone. Discrete covariates are standardized
    like any other column. Raises DataError naming the first column
    with zero sample variance.
    """
    names = d.covariate_names()
    cols = [d.w] + [d.x[:, j] for j in range(d.m)]
    means = np.array([c.mean() for c in cols])
    sds = np.array([c.std(ddof=1) for c in cols])
    for name, sd in zip(names, sds):
        if sd <= 0:
            raise DataError(f"cannot standardize: column {name!r} has zero variance")
    scaled = [(c - mu) / sd for c, mu, sd in zip(cols, means, sds)]
    out = Dataset(
        y=d.y.copy(),
        w=scaled[0],
        x=np.column_stack(scaled[1:]) if d.m else np.empty((d.n, 0)),
        w_name=d.w_name,
        x_names=d.x_names,
        y_name=d.y_name,
    )
    return out, StandardizationReport(names=names, means=means, sds=sds)


def bundled_birthweight_path():
    """Path to the bundled synthetic birthweight-shaped dataset (n=1168, 8 covariates)."""
    return importlib.resources.files("qcheck.datasets").joinpath(BUNDLED_BIRTHWEIGHT)


def synthetic_birthweight_like(n: int = 1168, seed: int = 90210) -> Dataset:
    """Generate a synthetic dataset shaped like the birthweight application.

    Columns mimic the application's layout (continuous age as the
    smoothing variable, a weight-gain and cigarette count, and binary
    indicators) but the values are simulated; nothing here is real
    data. Values are rounded so the CSV serialization stays compact.
    """
    from .rng import substream

    rng = substream(seed, 77)
    age = np.round(rng.uniform(18.0, 45.0, size=n), 2)
    wtgain = np.round(np.clip(rng.normal(30.0, 12.0, size=n), 0.0, None), 1)
    cigar = np.round(np.clip(rng.normal(9.0, 6.0, size=n), 0.0, 40.0), 0)
    boy = (rng.random(n) < 0.51).astype(float)
    black = (rng.random(n) < 0.08).astype(float)
    married = (rng.random(n) < 0.7).astype(float)
    novisit = (rng.random(n) < 0.02).astype(float)
    visits = np.round(np.clip(rng.normal(11.0, 3.0, size=n), 0.0, None), 0)
    noise = rng.standard_t(df=8, size=n) * (180.0 + 6.0 * np.abs(age - 30.0))
    y = np.round(
        2800.0
        + 9.0 * wtgain
        - 6.0 * cigar
        + 14.0 * (age - 30.0)
        - 0.9 * (age - 30.0) ** 2
        + 120.0 * boy
        - 150.0 * black
        + 40.0 * married
        - 180.0 * novisit
        + 4.0 * visits
        + noise,
        1,
    )
    return Dataset(
        y=y,
        w=age,
        x=np.column_stack([wtgain, cigar, boy, black, married, novisit, visits]),
        w_name="age",
        x_names=("wtgain", "cigar", "boy", "black", "married", "novisit", "visits"),
        y_name="y",
    )
