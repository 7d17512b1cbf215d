"""Deterministic CSV/JSON emission with provenance headers.

Every artifact starts with ``# key=value`` comment lines (tool version, seed,
config hash) followed by an RFC-4180-quoted table.  No timestamps: identical
(config, seed, version) must reproduce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json


def config_hash(model_text, args):
    """sha256 over the model document and the canonical argument JSON."""
    h = hashlib.sha256()
    h.update(model_text.encode() if isinstance(model_text, str) else model_text)
    h.update(b"\x00")
    h.update(json.dumps(args, sort_keys=True, default=str).encode())
    return h.hexdigest()


def provenance(version, seed, cfg_hash, **extra):
    out = {"version": version, "seed": seed, "config_hash": cfg_hash}
    out.update(extra)
    return out


def render_csv(meta, header, rows):
    """CSV text with '#' provenance lines, RFC-4180 quoting, '\n' endings."""
    buf = _io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}={meta[key]}\n")
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, meta, header, rows):
    text = render_csv(meta, header, rows)
    with open(path, "w", newline="") as f:
        f.write(text)
    return text


def write_json(path, obj):
    text = json.dumps(obj, indent=1, sort_keys=True)
    with open(path, "w") as f:
        f.write(text)
        f.write("\n")
    return text


def read_csv_meta(path):
    """Provenance dict and the first header row of an emitted CSV."""
    meta = {}
    header = None
    with open(path, newline="") as f:
        for line in f:
            if line.startswith("# ") and "=" in line:
                k, v = line[2:].rstrip("\n").split("=", 1)
                meta[k] = v
            else:
                header = next(csv.reader([line]))
                break
    return meta, header


def csv_to_dat(path):
    """gnuplot-friendly rendering: '#'-prefixed header, whitespace columns."""
    meta, _ = read_csv_meta(path)
    out = []
    for key in sorted(meta):
        out.append(f"# {key}={meta[key]}")
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(line for line in f if not line.startswith("#"))]
    if rows:
        out.append("# " + " ".join(rows[0]))
        for row in rows[1:]:
            out.append(" ".join(row))
    return "\n".join(out) + "\n"
