"""CSV artifacts and key-value config files."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fraccap.errors import ConfigError


def format_value(v) -> str:
    """17 significant digits for reals, plain text for everything else."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (tuple, list, np.ndarray)):
        return ";".join(format_value(x) for x in v)
    return str(v)


def write_text_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV with a header row, atomically (temp file then rename)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        w.writerow([format_value(v) for v in row])
    return write_text_atomic(path, buf.getvalue())


def write_summary(path, record: dict) -> Path:
    return write_csv(path, ["key", "value"], list(record.items()))


def write_trace(path, trace) -> Path:
    m = trace.terms
    header = ["k"] + [f"sigma_{j + 1}" for j in range(m)] + ["E", "grad_norm", "step"]
    rows = [[r.k, *r.sigma, r.error, r.grad_norm, r.step] for r in trace.records]
    return write_csv(path, header, rows)


DATA_COLUMNS = ("n", "t", "u_data", "f_data")


def write_data_file(path, t, u, f) -> Path:
    rows = [[n + 1, t[n], u[n], f[n]] for n in range(len(t))]
    return write_csv(path, DATA_COLUMNS, rows)


def read_data_file(path):
    """Observed data from a CSV with columns ``n, t, u_data, f_data``.

    Returns ``(t, u, f)`` for ``n = 1..N`` on a uniform grid.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(DATA_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ConfigError(f"{path}: missing columns {sorted(missing)}")
            rows = [(int(r["n"]), float(r["t"]), float(r["u_data"]), float(r["f_data"])) for r in reader]
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed value: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    rows.sort()
    n = np.array([r[0] for r in rows])
    if not np.array_equal(n, np.arange(1, len(rows) + 1)):
        raise ConfigError(f"{path}: rows must cover n = 1..N exactly once")
    t = np.array([r[1] for r in rows])
    dt = t[0]
    if not dt > 0 or not np.allclose(t, dt * n, rtol=1e-12, atol=0):
        raise ConfigError(f"{path}: nodes must satisfy t_n = n * dt")
    return t, np.array([r[2] for r in rows]), np.array([r[3] for r in rows])


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Values stay strings."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))
