"""Model terms and design-matrix assembly for the additive model engine.

A dataset is a plain mapping of column name to numpy array (float columns
for covariates, object/str columns for factors). Terms expand into blocks of
the design matrix with quadratic penalties:

- parametric factor: treatment-coded dummies against a reference level
- smooth: one centered B-spline basis, difference penalty
- by-factor smooth: the centered basis replicated per level, nonzero only on
  that level's rows; all levels share one smoothing parameter
- factor smooth: per-level uncentered bases with a shared difference penalty
  plus a shared ridge penalty, so each level's curve shrinks to zero
- random effect: one dummy per level under a ridge penalty
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .basis import BasisBlock, build_basis, build_raw_basis, difference_penalty


class TermKind(Enum):
    PARAMETRIC_FACTOR = "factor"
    SMOOTH = "smooth"
    BY_FACTOR_SMOOTH = "by_smooth"
    FACTOR_SMOOTH = "factor_smooth"
    RANDOM_EFFECT = "random_effect"


@dataclass(frozen=True)
class TermSpec:
    kind: TermKind
    covariate: str
    by_or_group: str | None = None
    k: int = 5
    penalty_order: int = 2
    ref_level: str | None = None  # parametric factors only

    def __post_init__(self):
        needs_factor = (TermKind.BY_FACTOR_SMOOTH, TermKind.FACTOR_SMOOTH)
        if self.kind in needs_factor and not self.by_or_group:
            raise ValueError(f"{self.kind.value} term requires a grouping column")
        if self.kind in (TermKind.SMOOTH, *needs_factor) and self.k < 3:
            raise ValueError(f"spline terms need k >= 3, got {self.k}")
        if self.penalty_order not in (1, 2):
            raise ValueError(f"penalty order must be 1 or 2, got {self.penalty_order}")

    @property
    def name(self) -> str:
        if self.kind is TermKind.PARAMETRIC_FACTOR:
            return f"factor({self.covariate})"
        if self.kind is TermKind.SMOOTH:
            return f"s({self.covariate})"
        if self.kind is TermKind.BY_FACTOR_SMOOTH:
            return f"s({self.covariate},by={self.by_or_group})"
        if self.kind is TermKind.FACTOR_SMOOTH:
            return f"fs({self.covariate},{self.by_or_group})"
        return f"re({self.covariate})"


@dataclass(frozen=True)
class ModelSpec:
    response: str
    terms: tuple[TermSpec, ...]
    ar1: str | float = "off"  # "estimate", "off", or a fixed rho
    series_start: str | None = None

    def __post_init__(self):
        if isinstance(self.ar1, str) and self.ar1 not in ("estimate", "off"):
            raise ValueError(f"ar1 must be 'estimate', 'off', or a number, got {self.ar1!r}")
        names = [t.name for t in self.terms]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate terms in model spec: {names}")


@dataclass(frozen=True)
class PenaltyBlock:
    """Quadratic penalty ``matrix`` acting on design columns [start, start+w)."""

    start: int
    matrix: np.ndarray
    label: str
    is_identity: bool = False

    @property
    def width(self) -> int:
        return self.matrix.shape[0]

    def embed(self, p: int, lam: float, out: np.ndarray) -> None:
        sl = slice(self.start, self.start + self.width)
        out[sl, sl] += lam * self.matrix


@dataclass(frozen=True)
class TermBlock:
    spec: TermSpec | None  # None marks the intercept
    name: str
    cols: range
    levels: tuple[str, ...] = ()
    level_cols: dict[str, range] = field(default_factory=dict)
    basis: BasisBlock | None = None


@dataclass(frozen=True)
class Design:
    X: np.ndarray
    penalties: tuple[PenaltyBlock, ...]
    blocks: tuple[TermBlock, ...]
    column_names: tuple[str, ...]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def block(self, name: str) -> TermBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(f"no term named {name!r}; model terms: {[b.name for b in self.blocks]}")

    def term_names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.blocks)

    def matrix_for(self, newdata: dict[str, np.ndarray], include: set[str] | None = None) -> np.ndarray:
        """Prediction design matrix; excluded terms contribute zero columns."""
        n = _rows_in(newdata)
        out = np.zeros((n, self.p))
        for block in self.blocks:
            if include is not None and block.name not in include and block.name != "intercept":
                continue
            if include is not None and block.name == "intercept" and "intercept" not in include:
                continue
            _fill_block(out, block, newdata)
        return out


def _rows_in(data: dict[str, np.ndarray]) -> int:
    sizes = {len(v) for v in data.values()}
    if len(sizes) != 1:
        raise ValueError(f"ragged data columns: lengths {sorted(sizes)}")
    return sizes.pop()


def _factor(values: np.ndarray) -> np.ndarray:
    return np.asarray([str(v) for v in values], dtype=object)


def _levels_of(values: np.ndarray) -> tuple[str, ...]:
    return tuple(sorted({str(v) for v in values}))


def _fill_block(out: np.ndarray, block: TermBlock, data: dict[str, np.ndarray]) -> None:
    if block.spec is None:  # intercept
        out[:, block.cols.start] = 1.0
        return
    spec = block.spec
    kind = spec.kind
    if kind is TermKind.PARAMETRIC_FACTOR or kind is TermKind.RANDOM_EFFECT:
        values = _factor(data[spec.covariate])
        for level, cols in block.level_cols.items():
            out[values == level, cols.start] = 1.0
        return
    x = np.asarray(data[spec.covariate], dtype=np.float64)
    assert block.basis is not None
    if kind is TermKind.SMOOTH:
        out[:, block.cols.start:block.cols.stop] = block.basis.evaluate(x)
        return
    groups = _factor(data[spec.by_or_group])
    basis_rows = block.basis.evaluate(x)
    for level, cols in block.level_cols.items():
        mask = groups == level
        out[np.ix_(mask, np.arange(cols.start, cols.stop))] = basis_rows[mask]


def build_design(dataset: dict[str, np.ndarray], spec: ModelSpec) -> tuple[Design, np.ndarray]:
    """Assemble (Design, response vector) for a model spec over a dataset."""
    for col in _referenced_columns(spec):
        if col not in dataset:
            raise KeyError(f"model spec references missing column {col!r}")
    n = _rows_in(dataset)
    y = np.asarray(dataset[spec.response], dtype=np.float64)

    columns: list[np.ndarray] = [np.ones((n, 1))]
    column_names: list[str] = ["(intercept)"]
    blocks: list[TermBlock] = [TermBlock(None, "intercept", range(0, 1))]
    penalties: list[PenaltyBlock] = []
    col = 1

    for term in spec.terms:
        if term.kind is TermKind.PARAMETRIC_FACTOR:
            values = _factor(dataset[term.covariate])
            levels = _levels_of(values)
            ref = term.ref_level if term.ref_level is not None else levels[0]
            if ref not in levels:
                raise ValueError(f"{term.name}: reference level {ref!r} not observed")
            coded = [lv for lv in levels if lv != ref]
            level_cols = {}
            for lv in coded:
                columns.append((values == lv).astype(np.float64)[:, None])
                column_names.append(f"{term.name}[{lv}]")
                level_cols[lv] = range(col, col + 1)
                col += 1
            blocks.append(TermBlock(term, term.name, range(col - len(coded), col),
                                    (ref, *coded), level_cols))
        elif term.kind is TermKind.SMOOTH:
            x = _unit_covariate(dataset[term.covariate], term.covariate)
            bb = build_basis(x, term.k, term.penalty_order)
            w = bb.design.shape[1]
            columns.append(bb.design)
            column_names.extend(f"{term.name}.{j}" for j in range(w))
            penalties.append(PenaltyBlock(col, bb.penalty, term.name))
            blocks.append(TermBlock(term, term.name, range(col, col + w), basis=bb))
            col += w
        elif term.kind is TermKind.BY_FACTOR_SMOOTH:
            x = _unit_covariate(dataset[term.covariate], term.covariate)
            groups = _factor(dataset[term.by_or_group])
            levels = _levels_of(groups)
            if len(levels) < 2:
                raise ValueError(f"{term.name}: factor {term.by_or_group!r} has one level")
            bb = build_basis(x, term.k, term.penalty_order)
            w = bb.design.shape[1]
            level_cols = {}
            start = col
            # one smoothing parameter per level, so a strongly nonlinear
            # level cannot force the others' deviations to under-smooth
            for lv in levels:
                block_cols = np.zeros((n, w))
                mask = groups == lv
                block_cols[mask] = bb.design[mask]
                columns.append(block_cols)
                column_names.extend(f"{term.name}[{lv}].{j}" for j in range(w))
                penalties.append(PenaltyBlock(col, bb.penalty, f"{term.name}[{lv}]"))
                level_cols[lv] = range(col, col + w)
                col += w
            blocks.append(TermBlock(term, term.name, range(start, col), tuple(levels),
                                    level_cols, bb))
        elif term.kind is TermKind.FACTOR_SMOOTH:
            x = _unit_covariate(dataset[term.covariate], term.covariate)
            groups = _factor(dataset[term.by_or_group])
            levels = _levels_of(groups)
            if len(levels) < 2:
                raise ValueError(f"{term.name}: factor {term.by_or_group!r} has one level")
            bb = build_raw_basis(x, term.k, term.penalty_order)
            w = term.k
            level_cols = {}
            start = col
            for lv in levels:
                block_cols = np.zeros((n, w))
                mask = groups == lv
                block_cols[mask] = bb.design[mask]
                columns.append(block_cols)
                column_names.extend(f"{term.name}[{lv}].{j}" for j in range(w))
                level_cols[lv] = range(col, col + w)
                col += w
            total = w * len(levels)
            diff_full = scipy.linalg.block_diag(*([difference_penalty(w, term.penalty_order)] * len(levels)))
            penalties.append(PenaltyBlock(start, diff_full, f"{term.name}:wiggle"))
            penalties.append(PenaltyBlock(start, np.eye(total), f"{term.name}:ridge", is_identity=True))
            blocks.append(TermBlock(term, term.name, range(start, col), tuple(levels),
                                    level_cols, bb))
        elif term.kind is TermKind.RANDOM_EFFECT:
            values = _factor(dataset[term.covariate])
            levels = _levels_of(values)
            level_cols = {}
            start = col
            for lv in levels:
                columns.append((values == lv).astype(np.float64)[:, None])
                column_names.append(f"{term.name}[{lv}]")
                level_cols[lv] = range(col, col + 1)
                col += 1
            penalties.append(PenaltyBlock(start, np.eye(len(levels)), term.name, is_identity=True))
            blocks.append(TermBlock(term, term.name, range(start, col), tuple(levels), level_cols))
        else:  # pragma: no cover
            raise AssertionError(term.kind)

    X = np.hstack(columns)
    return Design(X, tuple(penalties), tuple(blocks), tuple(column_names)), y


def _unit_covariate(values: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"covariate {name!r} contains non-finite values")
    return x


def _referenced_columns(spec: ModelSpec) -> set[str]:
    cols = {spec.response}
    for t in spec.terms:
        cols.add(t.covariate)
        if t.by_or_group:
            cols.add(t.by_or_group)
    if spec.series_start:
        cols.add(spec.series_start)
    return cols


# ---------------------------------------------------------------------------
# Declarative text serialization (stored next to run outputs for provenance)


def spec_to_text(spec: ModelSpec) -> str:
    lines = [f"response = {spec.response}"]
    for t in spec.terms:
        parts = [f"term = {t.kind.value}", f"covariate = {t.covariate}"]
        if t.by_or_group:
            parts.append(f"group = {t.by_or_group}")
        if t.kind in (TermKind.SMOOTH, TermKind.BY_FACTOR_SMOOTH, TermKind.FACTOR_SMOOTH):
            parts.append(f"k = {t.k}")
            parts.append(f"m = {t.penalty_order}")
        if t.ref_level:
            parts.append(f"ref = {t.ref_level}")
        lines.append("; ".join(parts))
    lines.append(f"ar1 = {spec.ar1}")
    if spec.series_start:
        lines.append(f"series_start = {spec.series_start}")
    return "\n".join(lines) + "\n"


def spec_from_text(text: str) -> ModelSpec:
    response = None
    ar1: str | float = "off"
    series_start = None
    terms: list[TermSpec] = []
    kinds = {k.value: k for k in TermKind}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("term = "):
            fields = dict()
            kind = None
            for part in line.split(";"):
                key, _, value = part.partition("=")
                key, value = key.strip(), value.strip()
                if key == "term":
                    kind = kinds[value]
                else:
                    fields[key] = value
            assert kind is not None
            terms.append(TermSpec(
                kind,
                fields["covariate"],
                fields.get("group"),
                int(fields.get("k", 5)),
                int(fields.get("m", 2)),
                fields.get("ref"),
            ))
        else:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "response":
                response = value
            elif key == "ar1":
                try:
                    ar1 = float(value)
                except ValueError:
                    ar1 = value
            elif key == "series_start":
                series_start = value
    if response is None:
        raise ValueError("model spec text lacks a response line")
    return ModelSpec(response, tuple(terms), ar1, series_start)
