"""Readers and writers for every on-disk format the toolkit touches.

Matrices come in as NPY (v1.0/v2.0, little-endian ``f4``/``f8``, C order) or
delimited text; embeddings as GloVe text; labels one per line; SemBias as four
``a:b`` pairs per line. Everything is widened to float64 on load.
"""

from __future__ import annotations

import ast
import csv
import hashlib
import json
import math
import struct
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable

import numpy as np

from .data import (
    CohortLabels,
    EmbeddingTable,
    RepresentationMatrix,
    ScoreVector,
    SemBiasInstance,
)
from .errors import DataError, FormatError, IoError, UnsupportedError

NPY_MAGIC = b"\x93NUMPY"
SUPPORTED_DESCR = ("<f4", "<f8")


def _open(path, mode: str = "rb", **kw):
    try:
        return open(path, mode, **kw)
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc


@contextmanager
def _text(path, **kw):
    """Open ``path`` as UTF-8 text; undecodable bytes become a FormatError."""
    with _open(path, "r", encoding="utf-8", **kw) as f:
        try:
            yield f
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: not UTF-8 text (byte {exc.start}: {exc.reason})") from None


# -- NPY ---------------------------------------------------------------------


def _read_npy_header(f, path) -> tuple[str, bool, tuple]:
    magic = f.read(6)
    if magic != NPY_MAGIC:
        raise FormatError(f"{path}: not an NPY file (bad magic {magic!r})")
    version = f.read(2)
    if len(version) != 2:
        raise FormatError(f"{path}: truncated NPY preamble")
    major, minor = version
    if (major, minor) == (1, 0):
        raw = f.read(2)
        fmt = "<H"
    elif (major, minor) == (2, 0):
        raw = f.read(4)
        fmt = "<I"
    elif major == 3:
        raise UnsupportedError(f"{path}: NPY version 3.0 (utf-8 header) is not supported")
    else:
        raise FormatError(f"{path}: unknown NPY version {major}.{minor}")
    if len(raw) != struct.calcsize(fmt):
        raise FormatError(f"{path}: truncated NPY header length")
    (hlen,) = struct.unpack(fmt, raw)
    header = f.read(hlen)
    if len(header) != hlen:
        raise FormatError(f"{path}: truncated NPY header")
    try:
        meta = ast.literal_eval(header.decode("latin1"))
    except (SyntaxError, ValueError) as exc:
        raise FormatError(f"{path}: unparsable NPY header") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"{path}: NPY header must hold exactly descr, fortran_order, shape")
    descr, fortran, shape = meta["descr"], meta["fortran_order"], meta["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise FormatError(f"{path}: bad shape {shape!r}")
    if not isinstance(fortran, bool):
        raise FormatError(f"{path}: bad fortran_order {fortran!r}")
    return descr, fortran, shape


def read_npy(path) -> RepresentationMatrix:
    """Load a 2-D float NPY file exactly (``f4`` is widened to ``f8``)."""
    with _open(path, "rb") as f:
        descr, fortran, shape = _read_npy_header(f, path)
        if descr not in SUPPORTED_DESCR:
            raise UnsupportedError(f"{path}: dtype {descr!r} not supported (need {' or '.join(SUPPORTED_DESCR)})")
        if fortran:
            raise UnsupportedError(f"{path}: Fortran-ordered arrays are not supported")
        if len(shape) != 2:
            raise UnsupportedError(f"{path}: expected a 2-D array, got shape {shape}")
        dtype = np.dtype(descr)
        count = shape[0] * shape[1]
        payload = f.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise FormatError(f"{path}: payload holds {len(payload)} bytes, header promises {count * dtype.itemsize}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(np.float64)
    return RepresentationMatrix(arr)


def write_npy(matrix, path) -> None:
    """Write an NPY v1.0 file holding little-endian float64 in C order.

    Plain 2-D arrays may contain ``nan`` (e.g. degenerate ablation scores).
    """
    if isinstance(matrix, RepresentationMatrix):
        arr = np.ascontiguousarray(matrix.data, dtype="<f8")
    else:
        arr = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64), dtype="<f8")
        if arr.ndim != 2:
            raise UnsupportedError(f"only 2-D arrays can be written, got shape {arr.shape}")
    try:
        with open(path, "wb") as f:
            np.lib.format.write_array(f, arr, version=(1, 0), allow_pickle=False)
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc


# -- delimited text ----------------------------------------------------------


def _split_records(lines: Iterable[str]):
    """Yield ``(line_number, fields)``; delimiter fixed by the first record."""
    delimiter = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        if delimiter is None:
            delimiter = "," if "," in line else " "
        if delimiter == ",":
            fields = [c.strip() for c in next(csv.reader([line]))]
        else:
            fields = line.split()
        yield lineno, fields


def read_csv_matrix(path, has_header: bool = False) -> RepresentationMatrix:
    """Read a rectangular numeric table (comma or whitespace separated)."""
    rows = []
    width = None
    with _text(path, newline="") as f:
        records = _split_records(f)
        if has_header:
            next(records, None)
        for lineno, fields in records:
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise FormatError(f"{path}: line {lineno} has {len(fields)} fields, expected {width}")
            try:
                rows.append([float(c) for c in fields])
            except ValueError:
                bad = next(c for c in fields if not _is_float(c))
                raise DataError(f"{path}: line {lineno}: non-numeric cell {bad!r}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        return RepresentationMatrix(np.array(rows, dtype=np.float64))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_matrix(path) -> RepresentationMatrix:
    """Dispatch on extension: ``.npy`` to :func:`read_npy`, else delimited text.

    Text files whose first line is non-numeric are treated as having a header.
    """
    path = Path(path)
    if path.suffix.lower() == ".npy":
        return read_npy(path)
    with _text(path) as f:
        first = f.readline()
    fields = first.replace(",", " ").split()
    has_header = bool(fields) and not all(_is_float(c) for c in fields)
    return read_csv_matrix(path, has_header=has_header)


# -- GloVe -------------------------------------------------------------------


def read_glove(path, vocab_filter: Iterable[str] | None = None) -> EmbeddingTable:
    """Parse a GloVe text file (``word v1 v2 ...`` per line) in file order.

    With ``vocab_filter``, only listed words are kept (and only those lines
    are converted to floats, which is what makes 400k-word files cheap).
    """
    keep = None if vocab_filter is None else {w.strip() for w in vocab_filter}
    words: list[str] = []
    vecs: list[np.ndarray] = []
    seen: dict[str, int] = {}
    dim = None
    with _text(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.strip().split(" ")
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise FormatError(f"{path}: line {lineno} has no vector")
            elif len(values) != dim:
                raise FormatError(f"{path}: line {lineno} has {len(values)} values, expected {dim}")
            if word in seen:
                raise DataError(f"{path}: duplicate word {word!r} on lines {seen[word]} and {lineno}")
            seen[word] = lineno
            if keep is not None and word not in keep:
                continue
            try:
                vecs.append(np.array(values, dtype=np.float64))
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric value in vector for {word!r}") from None
            words.append(word)
    if not words:
        raise DataError(f"{path}: no words left" + (" after filtering" if keep is not None else ""))
    try:
        return EmbeddingTable(tuple(words), np.vstack(vecs))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_glove(table: EmbeddingTable, path) -> None:
    with _open(path, "w", encoding="utf-8") as f:
        for word, vec in zip(table.vocabulary, table.vectors):
            f.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


# -- labels, word lists, SemBias --------------------------------------------


def _parse_label(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def read_labels(path, kind: str = "class", expected: int | None = None) -> CohortLabels:
    """One label per line. Integer-looking labels become ints."""
    values = []
    with _text(path) as f:
        lines = f.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        tok = line.strip()
        if not tok:
            raise DataError(f"{path}: empty label on line {lineno}")
        values.append(tok)
    if all(_is_int(v) for v in values):
        parsed = [int(v) for v in values]
    else:
        parsed = values
    if expected is not None and len(parsed) != expected:
        raise DataError(f"{path}: {len(parsed)} labels, expected {expected}")
    return CohortLabels(tuple(parsed), kind=kind)


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def write_labels(labels, path) -> None:
    values = labels.values if isinstance(labels, CohortLabels) else list(labels)
    with _open(path, "w", encoding="utf-8") as f:
        f.writelines(f"{v}\n" for v in values)


def read_wordlist(path) -> tuple[list[str], CohortLabels]:
    """Read ``word<TAB>group`` (or comma / whitespace separated) lines."""
    words, groups = [], []
    with _text(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.replace(",", " ").split()
            if len(parts) != 2:
                raise FormatError(f"{path}: line {lineno}: expected 'word<TAB>group'")
            word, group = parts[0].strip(), parts[1].strip()
            if word in words:
                raise DataError(f"{path}: duplicate word {word!r} on line {lineno}")
            words.append(word)
            groups.append(group)
    if not words:
        raise DataError(f"{path}: empty word list")
    return words, CohortLabels(tuple(groups), kind="word-group")


def write_wordlist(words, groups, path) -> None:
    values = groups.values if isinstance(groups, CohortLabels) else groups
    with _open(path, "w", encoding="utf-8") as f:
        f.writelines(f"{w}\t{g}\n" for w, g in zip(words, values))


def read_sembias(path, expected: int | None = None) -> list[SemBiasInstance]:
    """Parse SemBias: four ``a:b`` pairs per line, in the fixed order
    definition, stereotype, neutral, neutral."""
    out = []
    with _text(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            if len(fields) != 4:
                raise FormatError(f"{path}: line {lineno} has {len(fields)} pairs, expected 4")
            pairs = []
            for fld in fields:
                ab = fld.strip().split(":")
                if len(ab) != 2 or not ab[0] or not ab[1]:
                    raise FormatError(f"{path}: line {lineno}: malformed pair {fld!r}")
                pairs.append((ab[0], ab[1]))
            out.append(SemBiasInstance(tuple(pairs)))
    if expected is not None and len(out) != expected:
        raise DataError(f"{path}: {len(out)} instances, expected {expected}")
    return out


# -- scores and reports ------------------------------------------------------


def write_scores_csv(scores: ScoreVector, path) -> None:
    """``index,score`` rows; degenerate points get an empty score cell.

    Floats are written with ``repr`` so they read back bit-for-bit.
    """
    with _open(path, "w", encoding="utf-8", newline="") as f:
        f.write("index,score\n")
        for i, s in enumerate(scores.scores):
            f.write(f"{i},{'' if math.isnan(s) else repr(float(s))}\n")


def read_scores_csv(path) -> ScoreVector:
    idx, vals = [], []
    with _text(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["index", "score"]:
            raise FormatError(f"{path}: expected header 'index,score'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"{path}: line {lineno} has {len(row)} fields")
            try:
                idx.append(int(row[0]))
                vals.append(float(row[1]) if row[1].strip() else math.nan)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: bad value {row!r}") from None
    if idx != list(range(len(idx))):
        raise DataError(f"{path}: indices must run 0..N-1 in order")
    arr = np.array(vals, dtype=np.float64)
    return ScoreVector(arr, tuple(np.flatnonzero(np.isnan(arr)).tolist()))


def write_scores_json(scores: ScoreVector, path) -> None:
    write_json({"schema": 1, "scores": scores.scores, "degenerate_points": list(scores.degenerate_points)}, path)


def read_scores_json(path) -> ScoreVector:
    with _text(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if "scores" not in obj:
        raise FormatError(f"{path}: missing 'scores'")
    arr = np.array([math.nan if v is None else v for v in obj["scores"]], dtype=np.float64)
    return ScoreVector(arr, tuple(np.flatnonzero(np.isnan(arr)).tolist()))


def read_scores(path) -> ScoreVector:
    if Path(path).suffix.lower() == ".json":
        return read_scores_json(path)
    return read_scores_csv(path)


def jsonable(obj):
    """Convert numpy containers and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj, path) -> None:
    text = json.dumps(jsonable(obj), indent=2, sort_keys=False)
    try:
        Path(path).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc


def read_json(path):
    with _text(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None


def write_rows_csv(path, header: list[str], rows: Iterable[Iterable]) -> None:
    with _open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if (isinstance(v, float) and math.isnan(v)) else (repr(v) if isinstance(v, float) else v) for v in row])


def sha256_file(path, chunk: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with _open(path, "rb") as f:
        while block := f.read(chunk):
            h.update(block)
    return h.hexdigest()


__all__ = [
    "read_npy",
    "write_npy",
    "read_csv_matrix",
    "read_matrix",
    "read_glove",
    "write_glove",
    "read_labels",
    "write_labels",
    "read_wordlist",
    "write_wordlist",
    "read_sembias",
    "write_scores_csv",
    "read_scores_csv",
    "write_scores_json",
    "read_scores_json",
    "read_scores",
    "write_json",
    "read_json",
    "write_rows_csv",
    "sha256_file",
    "jsonable",
]
