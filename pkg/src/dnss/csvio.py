"""CSV output with a ``# key=value`` metadata header.

Floats are written in scientific notation with 12 significant digits so
that identical inputs give byte-identical files.
"""

import io
import numbers

import numpy as np


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, numbers.Integral):
        return str(int(v))
    if isinstance(v, numbers.Real):
        return f"{float(v):.11e}"
    if v is None:
        return ""
    return str(v)


def render_csv(columns, metadata=None):
    """Render ``columns`` (list of ``(name, values)``) as CSV text."""
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        text = format_value(value).replace("\n", " ")
        buf.write(f"# {key}={text}\n")
    names = [name for name, _ in columns]
    buf.write(",".join(names) + "\n")
    cols = [list(values) for _, values in columns]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")
    for row in zip(*cols):
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, columns, metadata=None):
    text = render_csv(columns, metadata)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def read_csv(path):
    """Read back a file written by :func:`write_csv` as ``(metadata, header, rows)``."""
    meta, rows, header = {}, [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                meta[key] = value
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append(line.split(","))
    return meta, header, rows
