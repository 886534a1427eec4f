"""CSV artifacts with a provenance comment line."""

import csv
import io
import os

import numpy as np

__all__ = ['format_value', 'write_csv', 'read_csv']


def format_value(v):
    """Shortest round-trip text for floats; plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows, provenance):
    """Write ``rows`` (sequences matching ``columns``) after one ``#`` line.

    ``provenance`` is a dict rendered as ``key=value`` pairs in sorted order.
    Returns the path written.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={provenance[k]}" for k in sorted(provenance)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def read_csv(path):
    """Return ``(provenance dict, header, rows)``; row values stay strings."""
    with open(path, newline="") as fh:
        first = fh.readline()
        prov = dict(kv.split("=", 1) for kv in first[1:].split())
        r = csv.reader(fh)
        header = next(r)
        rows = list(r)
    return prov, header, rows
