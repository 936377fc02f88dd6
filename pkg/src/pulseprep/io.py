"""CSV and report emission with self-describing headers.

Every output file begins with '# key = value' comment lines carrying the
fully resolved run configuration, so a result file documents exactly how
it was produced and the header re-parses to the configuration it came
from.  Floats are written with repr (shortest round-trip form), so runs
with identical seeds produce byte-identical payloads.
"""

from __future__ import annotations

import re
from pathlib import Path

_NUMERIC = re.compile(
    r"^-?(0|[1-9]\d*)(\.\d+)?([eE][+-]?\d+)?$"
    r"|^-?\.\d+([eE][+-]?\d+)?$|^-?(inf|nan)$"
)


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def parse_value(s: str):
    """Best-effort typed parse: bool words, then int, then float, else the
    raw string.  Strings with leading zeros (basis labels) stay strings."""
    if s == "true":
        return True
    if s == "false":
        return False
    if _NUMERIC.match(s):
        try:
            return int(s)
        except ValueError:
            return float(s)
    return s


def header_lines(header: dict) -> list:
    return [f"# {k} = {format_value(v)}" for k, v in header.items() if v is not None]


def write_csv(path, header: dict, columns: dict) -> None:
    """Columns is an ordered {name: sequence}; all sequences equal length."""
    names = list(columns)
    seqs = [list(columns[n]) for n in names]
    lengths = {len(s) for s in seqs}
    if len(lengths) > 1:
        raise ValueError(f"ragged columns: { {n: len(s) for n, s in zip(names, seqs)} }")
    lines = header_lines(header)
    lines.append(",".join(names))
    for row in zip(*seqs) if seqs and seqs[0] else []:
        lines.append(",".join(format_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Returns (header, columns).  Header values are the raw strings (use
    parse_value or a typed config loader to interpret them); column cells
    are parsed with parse_value."""
    header, names, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        elif names is None:
            names = line.split(",")
        else:
            rows.append([parse_value(c) for c in line.split(",")])
    columns = {n: [r[i] for r in rows] for i, n in enumerate(names or [])}
    return header, columns


def write_plot_triplet(path, header: dict, x, y, yerr) -> None:
    """Plot-data file: exactly the columns x, y, yerr."""
    write_csv(path, header, {"x": x, "y": y, "yerr": yerr})


def write_report(path, header: dict, body: dict) -> None:
    """Structured-text report: header comments then 'key: value' lines."""
    lines = header_lines(header)
    lines.extend(f"{k}: {format_value(v)}" for k, v in body.items())
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path):
    header, body = {}, {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        else:
            key, _, value = line.partition(":")
            body[key.strip()] = parse_value(value.strip())
    return header, body
