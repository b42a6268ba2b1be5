"""CSV readers and writers for interaction logs and catalogs."""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path

from .domain import Action, Dataset, Interaction, ItemRecord, ValidationError

INTERACTION_FIELDS = ("customer_id", "item_id", "action", "timestamp")
CATALOG_FIELDS = ("item_id", "retail_price", "price")


class ParseError(Exception):
    """A CSV file could not be read; ``line`` is 1-based, header is line 1."""

    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


def _rows(path: Path, expected: tuple[str, ...]):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise ParseError(path, None, e.strerror or str(e)) from e
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(path, 1, "file is empty")
        if tuple(h.strip() for h in header) != expected:
            raise ParseError(path, 1, f"expected header {','.join(expected)!r}, got {','.join(header)!r}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(expected):
                raise ParseError(path, reader.line_num, f"expected {len(expected)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def read_interactions(path) -> list[Interaction]:
    path = Path(path)
    out = []
    for line, (cid, iid, action, ts) in _rows(path, INTERACTION_FIELDS):
        try:
            out.append(Interaction(cid, iid, Action.parse(action), int(ts)))
        except (ValueError, ValidationError) as e:
            raise ParseError(path, line, str(e)) from None
    return out


def read_catalog(path) -> list[ItemRecord]:
    path = Path(path)
    out = []
    seen = set()
    for line, (iid, retail, price) in _rows(path, CATALOG_FIELDS):
        if iid in seen:
            raise ParseError(path, line, f"duplicate item_id {iid!r}")
        seen.add(iid)
        try:
            out.append(ItemRecord(iid, float(retail), float(price)))
        except ValueError as e:
            raise ParseError(path, line, str(e)) from None
    return out


def read_dataset(interactions_path, catalog_path) -> Dataset:
    return Dataset.from_records(read_interactions(interactions_path), read_catalog(catalog_path))


def interactions_csv(interactions) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INTERACTION_FIELDS)
    for x in interactions:
        w.writerow((x.customer_id, x.item_id, x.action.value, x.timestamp))
    return buf.getvalue()


def catalog_csv(catalog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CATALOG_FIELDS)
    for iid in sorted(catalog):
        rec = catalog[iid]
        w.writerow((rec.item_id, repr(float(rec.retail_price)), repr(float(rec.price))))
    return buf.getvalue()


def write_dataset(d: Dataset, interactions_path, catalog_path) -> None:
    Path(interactions_path).write_text(interactions_csv(d.interactions), encoding="utf-8")
    Path(catalog_path).write_text(catalog_csv(d.catalog), encoding="utf-8")


def dataset_hash(d: Dataset) -> str:
    """SHA-256 over the canonical CSV rendering of both tables."""
    h = hashlib.sha256()
    h.update(interactions_csv(d.interactions).encode())
    h.update(b"\0")
    h.update(catalog_csv(d.catalog).encode())
    return h.hexdigest()


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
