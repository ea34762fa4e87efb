"""Delimited on-disk formats: state snapshots and the energy ledger.

Both formats are plain CSV with a small commented header so they stay
inspectable and diffable.  Floats are written with %.17g, which
round-trips IEEE doubles exactly, so write -> read is bit-identical
and identical runs produce identical bytes.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import FormatError, ValidationError

_ENERGY_COLUMNS = (
    "m",
    "t",
    "f_el",
    "f_pf",
    "f_hy",
    "total",
    "hminus_dist",
    "viscous",
    "dt_F_integral",
    "edi_lhs",
    "edi_rhs",
    "det_min",
    "mass",
)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_snapshot(path: str, state, num_steps: int, step: int) -> None:
    """Write one nodal state: header, then one row per node.

    Row layout: node index (row-major), the node's reference
    coordinates, the y components, psi, and mu.  A state without a
    chemical potential (the initial one) writes zeros in the mu column.
    """
    grid = state.grid
    d, n = grid.d, grid.n
    num_nodes = n**d
    coords = grid.coords.reshape(d, num_nodes)
    y = state.y.reshape(d, num_nodes)
    psi = state.psi.reshape(num_nodes)
    mu = (
        state.mu.reshape(num_nodes)
        if state.mu is not None
        else np.zeros(num_nodes)
    )

    lines = [
        "# gelstep snapshot",
        f"# d = {d}",
        f"# n = {n}",
        f"# t = {_fmt(state.t)}",
        f"# M = {num_steps}",
        f"# step = {step}",
        "index,"
        + ",".join(f"x{a}" for a in range(d))
        + ","
        + ",".join(f"y{a}" for a in range(d))
        + ",psi,mu",
    ]
    for i in range(num_nodes):
        row = [str(i)]
        row += [_fmt(coords[a, i]) for a in range(d)]
        row += [_fmt(y[a, i]) for a in range(d)]
        row += [_fmt(psi[i]), _fmt(mu[i])]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path: str):
    """Read a snapshot back into (header, fields).

    header carries d, n, t, M, step; fields carries x, y, psi, mu with
    their grid shapes restored.  Structural damage (missing header
    keys, short or malformed rows, wrong node count) raises FormatError
    naming the offending line.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    header: dict = {}
    body_start = None
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            text = line[1:].strip()
            if "=" in text:
                key, _, value = text.partition("=")
                header[key.strip()] = value.strip()
            continue
        body_start = lineno
        break
    if body_start is None:
        raise FormatError(f"{path}: no column header line found")

    for key in ("d", "n", "t", "M", "step"):
        if key not in header:
            raise FormatError(f"{path}: header is missing {key!r}")
    try:
        d = int(header["d"])
        n = int(header["n"])
        t = float(header["t"])
        num_steps = int(header["M"])
        step = int(header["step"])
    except ValueError as err:
        raise FormatError(f"{path}: malformed header value ({err})") from None

    expected_cols = 1 + d + d + 2
    column_line = lines[body_start - 1]
    if len(column_line.split(",")) != expected_cols:
        raise FormatError(
            f"{path}: line {body_start}: expected {expected_cols} columns "
            f"in the header row, got {column_line!r}"
        )

    num_nodes = n**d
    coords = np.empty((d, num_nodes))
    y = np.empty((d, num_nodes))
    psi = np.empty(num_nodes)
    mu = np.empty(num_nodes)
    count = 0
    for lineno in range(body_start + 1, len(lines) + 1):
        line = lines[lineno - 1]
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != expected_cols:
            raise FormatError(
                f"{path}: line {lineno}: expected {expected_cols} fields, "
                f"got {len(parts)}: {line!r}"
            )
        try:
            idx = int(parts[0])
            values = [float(p) for p in parts[1:]]
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: malformed number in {line!r}") from None
        if idx != count:
            raise FormatError(
                f"{path}: line {lineno}: node index {idx} out of order "
                f"(expected {count})"
            )
        if count >= num_nodes:
            raise FormatError(
                f"{path}: line {lineno}: more rows than the {num_nodes} nodes "
                "announced by the header"
            )
        coords[:, count] = values[:d]
        y[:, count] = values[d : 2 * d]
        psi[count] = values[2 * d]
        mu[count] = values[2 * d + 1]
        count += 1
    if count != num_nodes:
        raise FormatError(
            f"{path}: truncated body: {count} rows for {num_nodes} nodes"
        )

    shape = (n,) * d
    fields = {
        "x": coords.reshape((d,) + shape),
        "y": y.reshape((d,) + shape),
        "psi": psi.reshape(shape),
        "mu": mu.reshape(shape),
    }
    meta = {"d": d, "n": n, "t": t, "M": num_steps, "step": step}
    return meta, fields


def check_snapshot_header(header: dict, cfg) -> None:
    """Raise ValidationError when a snapshot disagrees with a config."""
    mismatches = []
    if header["d"] != cfg.d:
        mismatches.append(f"d = {header['d']} vs {cfg.d}")
    if header["n"] != cfg.n:
        mismatches.append(f"n = {header['n']} vs {cfg.n}")
    if header["M"] != cfg.num_steps:
        mismatches.append(f"M = {header['M']} vs {cfg.num_steps}")
    if mismatches:
        raise ValidationError(
            "snapshot header disagrees with the run configuration: "
            + "; ".join(mismatches)
        )


def write_energy_csv(path: str, records) -> None:
    """Write the per-step energy ledger (one row per state, m = 0
    included)."""
    lines = [",".join(_ENERGY_COLUMNS)]
    for rec in records:
        row = [str(rec.m)]
        row += [_fmt(getattr(rec, name)) for name in _ENERGY_COLUMNS[1:]]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_energy_csv(path: str) -> list[dict]:
    """Read the ledger back as dicts keyed by the column names."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty energy ledger")
    names = lines[0].split(",")
    if tuple(names) != _ENERGY_COLUMNS:
        raise FormatError(
            f"{path}: line 1: expected columns {','.join(_ENERGY_COLUMNS)}, "
            f"got {lines[0]!r}"
        )
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(_ENERGY_COLUMNS):
            raise FormatError(
                f"{path}: line {lineno}: expected {len(_ENERGY_COLUMNS)} "
                f"fields, got {len(parts)}: {line!r}"
            )
        try:
            row = {"m": int(parts[0])}
            for name, part in zip(_ENERGY_COLUMNS[1:], parts[1:]):
                row[name] = float(part)
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: malformed number in {line!r}") from None
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: energy ledger has a header but no rows")
    return rows


def write_trajectory(traj, out_dir: str, snapshot_every: int = 1) -> list[str]:
    """Write the ledger plus periodic state snapshots; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    energy_path = os.path.join(out_dir, "energy.csv")
    write_energy_csv(energy_path, traj.records)
    paths.append(energy_path)
    M = traj.num_steps
    for m, state in enumerate(traj.states):
        if m % snapshot_every == 0 or m == M:
            path = os.path.join(out_dir, f"state_{m:04d}.csv")
            write_snapshot(path, state, M, m)
            paths.append(path)
    return paths
