"""Columnar detailed-cube store and star-schema CSV ingestion.

The detailed cube keeps one dictionary-encoded coordinate column per
dimension (at that dimension's most detailed level) plus one numeric column
per measure.  Measures whose inputs all parse as integers are stored as
int64 so aggregate comparisons can be exact; anything else is float64.

Filter evaluation produces row bitsets (boolean arrays over 0..row_count-1)
so the strategy selector can combine and count regions cheaply.  Per-atom
bitsets are cached after first use: the five facilitator queries of one
request share atoms heavily.  The cube is immutable after load; the caches
fill idempotently, so concurrent readers are fine.
"""

from __future__ import annotations

import json
from array import array
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import csv

import numpy as np

from .errors import (
    ParseError,
    SchemaMismatch,
    UnknownDimension,
    UnknownLevel,
    UnknownMeasure,
    UnknownMemberLabel,
    AmbiguousLevel,
)
from .hierarchy import (
    ALL_LEVEL_NAME,
    Dimension,
    Level,
    read_members_csv,
    validate_hierarchy,
)

MEASURE_KINDS = ("integer", "decimal")


@dataclass(frozen=True)
class Measure:
    name: str
    kind: str  # 'integer' | 'decimal'


class CubeSchema:
    """Named cube: ordered dimensions plus ordered measures."""

    def __init__(self, cube_name: str, dimensions: Sequence[Dimension], measures: Sequence[Measure]):
        names = [d.name for d in dimensions]
        if len(set(n.lower() for n in names)) != len(names):
            raise SchemaMismatch(f"duplicate dimension in cube {cube_name}")
        if not measures:
            raise SchemaMismatch(f"cube {cube_name} declares no measures")
        self.cube_name = cube_name
        self.dimensions = tuple(dimensions)
        self.measures = tuple(measures)
        self._dim_by_name = {d.name.lower(): d for d in self.dimensions}
        self._measure_by_name = {m.name.lower(): m for m in self.measures}

    def dimension(self, name: str) -> Dimension:
        dim = self._dim_by_name.get(name.lower())
        if dim is None:
            raise UnknownDimension(f"cube {self.cube_name} has no dimension {name!r}")
        return dim

    def measure(self, name: str) -> Measure:
        m = self._measure_by_name.get(name.lower())
        if m is None:
            raise UnknownMeasure(f"cube {self.cube_name} has no measure {name!r}")
        return m

    def resolve_level(self, ref: str) -> Level:
        """Resolve 'Dim.Level' or a bare level name (must be unambiguous)."""
        if "." in ref:
            dim_name, _, level_name = ref.partition(".")
            return self.dimension(dim_name).level(level_name)
        hits = []
        for dim in self.dimensions:
            try:
                hits.append(dim.level(ref))
            except UnknownLevel:
                pass
        if not hits:
            raise UnknownLevel(f"no level named {ref!r} in cube {self.cube_name}")
        if len(hits) > 1:
            dims = ", ".join(lv.dimension_name for lv in hits)
            raise AmbiguousLevel(f"level {ref!r} is ambiguous across dimensions: {dims}")
        return hits[0]


@dataclass
class ExecStats:
    """Instrumentation: how many fact-scan query executions have run."""

    fact_scans: int = 0


class DetailedCube:
    """The detailed cube: coordinate codes at level 0 plus measure columns."""

    def __init__(
        self,
        schema: CubeSchema,
        coordinates: Mapping[str, np.ndarray],
        measures: Mapping[str, np.ndarray],
    ):
        self.schema = schema
        self.coordinates = {d.name: np.asarray(coordinates[d.name], dtype=np.int64)
                            for d in schema.dimensions}
        self.measure_columns = {m.name: np.asarray(measures[m.name]) for m in schema.measures}
        lengths = {len(c) for c in self.coordinates.values()}
        lengths |= {len(c) for c in self.measure_columns.values()}
        if len(lengths) > 1:
            raise SchemaMismatch(f"column lengths differ: {sorted(lengths)}")
        self.row_count = lengths.pop() if lengths else 0
        for dim in schema.dimensions:
            col = self.coordinates[dim.name]
            if len(col) and (col.min() < 0 or col.max() >= dim.detailed_level.member_count):
                raise SchemaMismatch(f"coordinate code out of range for dimension {dim.name}")
        self.exec_stats = ExecStats()
        self._atom_mask_cache: dict[tuple, np.ndarray] = {}
        self._condition_mask_cache: dict[tuple, np.ndarray] = {}

    # -- filtering --------------------------------------------------------

    def rolled_column(self, dim_name: str, depth: int, rows: np.ndarray | None = None) -> np.ndarray:
        """Coordinate column mapped up to ``depth`` (optionally row-subset)."""
        dim = self.schema.dimension(dim_name)
        col = self.coordinates[dim.name]
        if rows is not None:
            col = col[rows]
        if depth == 0:
            return col
        return dim.anc_array(0, depth)[col]

    def atom_mask(self, level: Level, codes: Sequence[int]) -> np.ndarray:
        """Bitset of rows whose coordinate rolls up into ``codes`` at ``level``."""
        key = (level.dimension_name, level.depth, tuple(codes))
        cached = self._atom_mask_cache.get(key)
        if cached is None:
            rolled = self.rolled_column(level.dimension_name, level.depth)
            if len(key[2]) == 1:
                mask = rolled == key[2][0]
            else:
                mask = np.isin(rolled, np.asarray(key[2], dtype=np.int64))
            cached = self._atom_mask_cache.setdefault(key, mask)
        return cached

    def condition_mask(self, atoms: Sequence[tuple[Level, Sequence[int]]]) -> np.ndarray:
        """Bitset for a conjunction of (level, codes) atoms; cached whole."""
        key = tuple(sorted((lv.dimension_name, lv.depth, tuple(codes)) for lv, codes in atoms))
        cached = self._condition_mask_cache.get(key)
        if cached is None:
            mask = np.ones(self.row_count, dtype=bool)
            for level, codes in atoms:
                mask = mask & self.atom_mask(level, codes)
            cached = self._condition_mask_cache.setdefault(key, mask)
        return cached


def filter_rows(cube: DetailedCube, detailed_condition: Mapping[str, Iterable[int]]) -> np.ndarray:
    """Rows whose level-0 coordinate is in the code set of every constrained
    dimension (bitset).  Unconstrained dimensions are unrestricted."""
    atoms = []
    for dim_name, codes in detailed_condition.items():
        dim = cube.schema.dimension(dim_name)  # raises UnknownDimension
        atoms.append((dim.detailed_level, tuple(sorted(int(c) for c in codes))))
    return cube.condition_mask(atoms)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _parse_schema_json(schema_file) -> dict:
    path = Path(schema_file)
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    for field_name in ("cube", "dimensions", "measures"):
        if field_name not in spec:
            raise SchemaMismatch(f"{path}: schema file missing {field_name!r}")
    return spec


def _resolve_dimension_files(spec: dict, schema_dir: Path, dimension_files) -> dict[str, Path]:
    """Member file per dimension: explicit NAME=PATH / positional overrides
    win over the paths declared in the schema file."""
    declared: dict[str, Path] = {}
    for dspec in spec["dimensions"]:
        if "members" in dspec:
            declared[dspec["name"].lower()] = schema_dir / dspec["members"]
    overrides = list(dimension_files or [])
    positional: list[Path] = []
    for entry in overrides:
        entry = str(entry)
        if "=" in entry:
            name, _, p = entry.partition("=")
            declared[name.strip().lower()] = Path(p)
        else:
            positional.append(Path(entry))
    if positional:
        if len(positional) != len(spec["dimensions"]):
            raise SchemaMismatch(
                f"got {len(positional)} dimension files for {len(spec['dimensions'])} dimensions"
            )
        for dspec, p in zip(spec["dimensions"], positional):
            declared[dspec["name"].lower()] = p
    missing = [d["name"] for d in spec["dimensions"] if d["name"].lower() not in declared]
    if missing:
        raise SchemaMismatch(f"no member file for dimensions: {', '.join(missing)}")
    return declared


def load_cube(
    schema_file,
    dimension_files: Sequence[str] | None = None,
    fact_file=None,
    delimiter: str = ",",
) -> DetailedCube:
    """Load schema JSON + member CSVs + fact CSV into a DetailedCube."""
    spec = _parse_schema_json(schema_file)
    schema_dir = Path(schema_file).parent

    dim_files = _resolve_dimension_files(spec, schema_dir, dimension_files)
    dimensions = []
    for dspec in spec["dimensions"]:
        levels = list(dspec.get("levels", []))
        if not levels or levels[-1] != ALL_LEVEL_NAME:
            raise SchemaMismatch(
                f"dimension {dspec.get('name')}: level list must end with {ALL_LEVEL_NAME}"
            )
        dim = read_members_csv(dspec["name"], levels, dim_files[dspec["name"].lower()],
                               delimiter=delimiter)
        problems = validate_hierarchy(dim)
        if problems:
            raise ParseError(f"dimension {dim.name} failed validation: {'; '.join(problems)}")
        dimensions.append(dim)

    measures = []
    for mspec in spec["measures"]:
        kind = mspec.get("kind")
        if kind is not None and kind not in MEASURE_KINDS:
            raise SchemaMismatch(f"measure {mspec.get('name')}: unknown kind {kind!r}")
        measures.append((mspec["name"], kind))

    schema = CubeSchema(spec["cube"], dimensions,
                        [Measure(name, kind or "decimal") for name, kind in measures])

    if fact_file is None:
        if "facts" not in spec:
            raise SchemaMismatch(f"{schema_file}: no fact file given or declared")
        fact_file = schema_dir / spec["facts"]
    coords, measure_cols, resolved = _read_facts(
        fact_file, dimensions, measures, delimiter=delimiter
    )
    schema = CubeSchema(spec["cube"], dimensions, resolved)
    return DetailedCube(schema, coords, measure_cols)


def _read_facts(fact_file, dimensions, measures, delimiter=","):
    dim_by_l0 = {}
    for d in dimensions:
        low = d.detailed_level.name.lower()
        if low in dim_by_l0:
            raise SchemaMismatch(
                f"detailed level name {d.detailed_level.name!r} is shared by dimensions "
                f"{dim_by_l0[low].name} and {d.name}; fact columns would be ambiguous"
            )
        dim_by_l0[low] = d
    measure_kinds = {name.lower(): kind for name, kind in measures}
    with open(fact_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{fact_file}: missing header row") from None

        dim_cols: dict[str, int] = {}
        measure_cols_idx: dict[str, int] = {}
        for idx, name in enumerate(header):
            low = name.lower()
            if low in dim_by_l0:
                dim_cols[dim_by_l0[low].name] = idx
            elif low in measure_kinds:
                measure_cols_idx[low] = idx
            else:
                raise SchemaMismatch(f"{fact_file}: unexpected column {name!r}")
        missing = [d.name for d in dimensions if d.name not in dim_cols]
        missing += [name for name, _ in measures if name.lower() not in measure_cols_idx]
        if missing:
            raise SchemaMismatch(f"{fact_file}: missing columns: {', '.join(missing)}")

        dim_order = [(d, dim_cols[d.name]) for d in dimensions]
        dicts = {d.name: d.dictionaries[0]._code_by_label for d, _ in dim_order}
        coord_acc = {d.name: array("q") for d, _ in dim_order}
        m_int = {name.lower(): array("q") for name, _ in measures}
        m_float = {name.lower(): array("d") for name, _ in measures}
        is_int = {name.lower(): kind != "decimal" for name, kind in measures}
        declared_int = {name.lower(): kind == "integer" for name, kind in measures}
        width = len(header)

        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ParseError(f"{fact_file}:{lineno}: expected {width} fields, got {len(row)}")
            for dim, idx in dim_order:
                label = row[idx].strip()
                if not label:
                    raise ParseError(f"{fact_file}:{lineno}: empty coordinate for {dim.name}")
                try:
                    coord_acc[dim.name].append(dicts[dim.name][label])
                except KeyError:
                    raise UnknownMemberLabel(
                        f"{fact_file}:{lineno}: unknown member {label!r} "
                        f"for dimension {dim.name}"
                    ) from None
            for low, idx in measure_cols_idx.items():
                text = row[idx].strip()
                if not text:
                    raise ParseError(f"{fact_file}:{lineno}: null measure {low!r}")
                if is_int[low]:
                    try:
                        m_int[low].append(int(text))
                        m_float[low].append(float(text))
                        continue
                    except ValueError:
                        if declared_int[low]:
                            raise ParseError(
                                f"{fact_file}:{lineno}: measure {low!r} declared integer "
                                f"but got {text!r}"
                            ) from None
                        is_int[low] = False  # fall back to decimal inference
                try:
                    m_float[low].append(float(text))
                except ValueError:
                    raise ParseError(
                        f"{fact_file}:{lineno}: measure {low!r} is not numeric: {text!r}"
                    ) from None

    coords = {name: np.frombuffer(acc, dtype=np.int64) if len(acc) else np.empty(0, np.int64)
              for name, acc in coord_acc.items()}
    out_measures = {}
    resolved = []
    for name, kind in measures:
        low = name.lower()
        if is_int[low]:
            col = np.frombuffer(m_int[low], dtype=np.int64) if len(m_int[low]) else np.empty(0, np.int64)
            resolved.append(Measure(name, "integer"))
        else:
            col = np.frombuffer(m_float[low], dtype=np.float64) if len(m_float[low]) else np.empty(0, np.float64)
            resolved.append(Measure(name, "decimal"))
        out_measures[name] = col
    return coords, out_measures, resolved
