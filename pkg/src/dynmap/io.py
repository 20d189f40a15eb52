"""
File formats: long-format matrix sequences, inclusion masks, coordinates and
run manifests.

Matrix files hold one row per pair, ``period,row_label,col_label,value``;
listing the upper triangle is enough. Coordinates are written only for
objects present in a period, so reading them back also recovers the mask.
"""
import csv
import json

import numpy as np

from .errors import DataError, ParseError

MATRIX_HEADER = ["period", "row_label", "col_label", "value"]
MASK_HEADER = ["period", "label", "included"]


def _sort_key(value):
    try:
        return (0, float(value), "")
    except (TypeError, ValueError):
        return (1, 0.0, str(value))


def _open(f, mode):
    if hasattr(f, "read") or hasattr(f, "write"):
        return f, False
    return open(f, mode, newline="", encoding="utf-8"), True


def _reader(f, header):
    """Yield (line_number, row dict) after checking the header."""
    handle, owned = _open(f, "r")
    try:
        reader = csv.reader(handle)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        cols = [c.strip() for c in first]
        missing = [c for c in header if c not in cols]
        if missing:
            raise ParseError(f"missing columns {missing}; header is {cols}", 1)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(cols):
                raise ParseError(f"expected {len(cols)} fields, got {len(row)}", reader.line_num)
            yield reader.line_num, dict(zip(cols, (c.strip() for c in row)))
    finally:
        if owned:
            handle.close()


def _float(text, line, what="value"):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not a number", line) from None


def write_matrices(f, D, labels, periods, mask=None):
    """Write the upper triangle of every period, skipping pairs with an absent object."""
    D = np.asarray(D, dtype=float)
    handle, owned = _open(f, "w")
    try:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(MATRIX_HEADER)
        for t, period in enumerate(periods):
            for i in range(len(labels)):
                for j in range(i + 1, len(labels)):
                    if mask is not None and not (mask[t][i] and mask[t][j]):
                        continue
                    w.writerow([period, labels[i], labels[j], repr(float(D[t, i, j]))])
    finally:
        if owned:
            handle.close()


def read_matrices(f):
    """Read a long-format matrix file.

    Returns
    -------
    D : ndarray of shape (T, n, n)
        Unlisted pairs are 0.
    labels : list of str
        Sorted union of row and column labels.
    periods : list of str
        Sorted period labels.
    """
    entries = {}
    for line, row in _reader(f, MATRIX_HEADER):
        value = _float(row["value"], line)
        a, b, period = row["row_label"], row["col_label"], row["period"]
        if not period or not a or not b:
            raise ParseError("empty period or label", line)
        if a == b:
            if value != 0:
                raise DataError(f"line {line}: nonzero diagonal entry for {a} in period {period}")
            entries.setdefault(period, {}).setdefault((a, a), (0.0, line))
            continue
        key = (a, b) if _sort_key(a) <= _sort_key(b) else (b, a)
        bucket = entries.setdefault(period, {})
        if key in bucket and bucket[key][0] != value:
            raise DataError(f"line {line}: conflicting values for pair {key[0]}-{key[1]} in period {period}")
        bucket[key] = (value, line)
    if not entries:
        raise ParseError("no data rows", 2)
    periods = sorted(entries, key=_sort_key)
    labels = sorted({x for bucket in entries.values() for pair in bucket for x in pair}, key=_sort_key)
    index = {label: k for k, label in enumerate(labels)}
    D = np.zeros((len(periods), len(labels), len(labels)))
    for t, period in enumerate(periods):
        for (a, b), (value, _) in entries[period].items():
            D[t, index[a], index[b]] = D[t, index[b], index[a]] = value
    return D, labels, periods


def write_mask(f, mask, labels, periods):
    handle, owned = _open(f, "w")
    try:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(MASK_HEADER)
        for t, period in enumerate(periods):
            for i, label in enumerate(labels):
                w.writerow([period, label, int(mask[t][i])])
    finally:
        if owned:
            handle.close()


def read_mask(f, labels, periods):
    """Read a mask file into a ``(T, n)`` int array aligned to ``labels`` and ``periods``.
    Objects not listed for a period count as absent."""
    index = {str(label): k for k, label in enumerate(labels)}
    pindex = {str(p): t for t, p in enumerate(periods)}
    mask = np.zeros((len(periods), len(labels)), dtype=np.int64)
    for line, row in _reader(f, MASK_HEADER):
        if row["included"] not in ("0", "1"):
            raise ParseError(f"included must be 0 or 1, got {row['included']!r}", line)
        if row["period"] not in pindex or row["label"] not in index:
            raise DataError(f"line {line}: unknown period {row['period']!r} or label {row['label']!r}")
        mask[pindex[row["period"]], index[row["label"]]] = int(row["included"])
    return mask


def write_coords(f, X, labels, periods, mask=None):
    X = np.asarray(X, dtype=float)
    handle, owned = _open(f, "w")
    try:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(["period", "label"] + [f"dim{k + 1}" for k in range(X.shape[2])])
        for t, period in enumerate(periods):
            for i, label in enumerate(labels):
                if mask is None or mask[t][i]:
                    w.writerow([period, label] + [repr(float(v)) for v in X[t, i]])
    finally:
        if owned:
            handle.close()


def read_coords(f):
    """Read a coordinates file.

    Returns
    -------
    X : ndarray of shape (T, n, d)
        Zero where an object has no row.
    labels, periods : list of str
    mask : ndarray of shape (T, n)
        1 where a row was present.
    """
    rows = []
    dims = None
    for line, row in _reader(f, ["period", "label", "dim1"]):
        if dims is None:
            dims = sorted((k for k in row if k.startswith("dim")), key=lambda k: int(k[3:]))
        coords = [_float(row[k], line, k) for k in dims]
        rows.append((row["period"], row["label"], coords, line))
    if not rows:
        raise ParseError("no data rows", 2)
    periods = sorted({r[0] for r in rows}, key=_sort_key)
    labels = sorted({r[1] for r in rows}, key=_sort_key)
    pindex = {p: t for t, p in enumerate(periods)}
    index = {label: k for k, label in enumerate(labels)}
    X = np.zeros((len(periods), len(labels), len(dims)))
    mask = np.zeros((len(periods), len(labels)), dtype=np.int64)
    for period, label, coords, line in rows:
        t, i = pindex[period], index[label]
        if mask[t, i]:
            raise DataError(f"line {line}: duplicate coordinates for {label} in period {period}")
        X[t, i] = coords
        mask[t, i] = 1
    return X, labels, periods, mask


def write_manifest(f, manifest):
    handle, owned = _open(f, "w")
    try:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    finally:
        if owned:
            handle.close()


def read_manifest(f):
    handle, owned = _open(f, "r")
    try:
        return json.load(handle)
    finally:
        if owned:
            handle.close()
