"""Overlay-graph dump formats: a line-oriented text form and a compact binary form.

Text form (one graph per file)::

    overlay-graph-text 1
    n <nodes>
    m <layers>
    seed <compact json>
    confighash <hex or ->
    nodemap <ids...>          # only for site-percolated graphs
    layer <k> <strength-repr>
    nodes <ids...>
    edges <u> <v> <u> <v> ...
    ...
    end

Strength values are written with repr so they round-trip float64 exactly.
The union edge set is recomputed on load (it is a deterministic function
of the layers), so a loaded graph is bit-identical to the dumped one.

The binary form carries the same payload as raw little-endian arrays.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .sampling import OverlayGraph, _dedupe

__all__ = ["dump_text", "load_text", "dump_binary", "load_binary", "dump", "load"]

_TEXT_MAGIC = "overlay-graph-text 1"
_BIN_MAGIC = b"OVGBIN1\x00"


def dump_text(g: OverlayGraph, path: str | Path, config_hash: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_TEXT_MAGIC + "\n")
        fh.write(f"n {g.n}\n")
        fh.write(f"m {g.m}\n")
        fh.write("seed " + json.dumps(g.seed_info, sort_keys=True) + "\n")
        fh.write(f"confighash {config_hash or '-'}\n")
        if g.node_map is not None:
            fh.write("nodemap " + " ".join(map(str, g.node_map.tolist())) + "\n")
        for k in range(g.m):
            fh.write(f"layer {k} {float(g.layer_strengths[k])!r}\n")
            fh.write("nodes " + " ".join(map(str, g.layer_nodes_of(k).tolist())) + "\n")
            fh.write("edges " + " ".join(map(str, g.layer_edges_of(k).ravel().tolist())) + "\n")
        fh.write("end\n")


def load_text(path: str | Path) -> OverlayGraph:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _TEXT_MAGIC:
        raise ValueError(f"{path}: not an overlay-graph text dump")
    pos = 1

    def take(prefix: str) -> str:
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix + " "):
            raise ValueError(f"{path}: expected '{prefix} ...' at line {pos + 1}")
        val = lines[pos][len(prefix) + 1 :]
        pos += 1
        return val

    n = int(take("n"))
    m = int(take("m"))
    seed_info = json.loads(take("seed"))
    take("confighash")
    node_map = None
    if pos < len(lines) and lines[pos].startswith("nodemap"):
        body = lines[pos][len("nodemap") :].strip()
        node_map = np.array([int(v) for v in body.split()] if body else [], dtype=np.int64)
        pos += 1
    node_lists, edge_lists, strengths = [], [], []
    for k in range(m):
        head = take("layer").split()
        if int(head[0]) != k:
            raise ValueError(f"{path}: layer {head[0]} out of order")
        strengths.append(float(head[1]))
        body = take("nodes")
        node_lists.append(np.array([int(v) for v in body.split()] if body else [], dtype=np.int64))
        body = take("edges")
        flat = np.array([int(v) for v in body.split()] if body else [], dtype=np.int64)
        edge_lists.append(flat.reshape(-1, 2))
    if pos >= len(lines) or lines[pos] != "end":
        raise ValueError(f"{path}: missing end marker")
    return _assemble(n, m, node_lists, edge_lists, strengths, seed_info, node_map)


def _assemble(n, m, node_lists, edge_lists, strengths, seed_info, node_map) -> OverlayGraph:
    node_ptr = np.zeros(m + 1, dtype=np.int64)
    node_ptr[1:] = np.cumsum([len(v) for v in node_lists]) if m else 0
    edge_ptr = np.zeros(m + 1, dtype=np.int64)
    edge_ptr[1:] = np.cumsum([len(e) for e in edge_lists]) if m else 0
    layer_nodes = np.concatenate(node_lists) if m else np.empty(0, dtype=np.int64)
    layer_edges = (
        np.concatenate(edge_lists)
        if any(len(e) for e in edge_lists)
        else np.empty((0, 2), dtype=np.int64)
    )
    union_edges, union_mult = _dedupe(layer_edges, max(n, 1))
    return OverlayGraph(
        n=n,
        node_ptr=node_ptr,
        layer_nodes=layer_nodes,
        edge_ptr=edge_ptr,
        layer_edges=layer_edges,
        layer_strengths=np.array(strengths, dtype=np.float64),
        union_edges=union_edges,
        union_mult=union_mult,
        seed_info=seed_info,
        node_map=node_map,
    )


def _write_block(fh, arr: np.ndarray) -> None:
    raw = np.ascontiguousarray(arr).tobytes()
    fh.write(struct.pack("<q", len(raw)))
    fh.write(raw)


def _read_block(fh, dtype, shape=None) -> np.ndarray:
    (nbytes,) = struct.unpack("<q", fh.read(8))
    arr = np.frombuffer(fh.read(nbytes), dtype=dtype).copy()
    return arr.reshape(shape) if shape is not None else arr


def dump_binary(g: OverlayGraph, path: str | Path, config_hash: str | None = None) -> None:
    meta = json.dumps(
        {"seed": g.seed_info, "confighash": config_hash or "-"}, sort_keys=True
    ).encode()
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<qqq", g.n, g.m, 1 if g.node_map is not None else 0))
        fh.write(struct.pack("<q", len(meta)))
        fh.write(meta)
        _write_block(fh, g.node_ptr)
        _write_block(fh, g.layer_nodes)
        _write_block(fh, g.edge_ptr)
        _write_block(fh, g.layer_edges.ravel())
        _write_block(fh, g.layer_strengths)
        if g.node_map is not None:
            _write_block(fh, g.node_map)


def load_binary(path: str | Path) -> OverlayGraph:
    with open(path, "rb") as fh:
        if fh.read(len(_BIN_MAGIC)) != _BIN_MAGIC:
            raise ValueError(f"{path}: not an overlay-graph binary dump")
        n, m, has_map = struct.unpack("<qqq", fh.read(24))
        (meta_len,) = struct.unpack("<q", fh.read(8))
        meta = json.loads(fh.read(meta_len).decode())
        node_ptr = _read_block(fh, np.int64)
        layer_nodes = _read_block(fh, np.int64)
        edge_ptr = _read_block(fh, np.int64)
        layer_edges = _read_block(fh, np.int64).reshape(-1, 2)
        strengths = _read_block(fh, np.float64)
        node_map = _read_block(fh, np.int64) if has_map else None
    union_edges, union_mult = _dedupe(layer_edges, max(n, 1))
    return OverlayGraph(
        n=n,
        node_ptr=node_ptr,
        layer_nodes=layer_nodes,
        edge_ptr=edge_ptr,
        layer_edges=layer_edges,
        layer_strengths=strengths,
        union_edges=union_edges,
        union_mult=union_mult,
        seed_info=meta["seed"],
        node_map=node_map,
    )


def dump(g: OverlayGraph, path: str | Path, config_hash: str | None = None) -> None:
    """Dump by extension: .bin for binary, anything else text."""
    if str(path).endswith(".bin"):
        dump_binary(g, path, config_hash)
    else:
        dump_text(g, path, config_hash)


def load(path: str | Path) -> OverlayGraph:
    with open(path, "rb") as fh:
        magic = fh.read(len(_BIN_MAGIC))
    return load_binary(path) if magic == _BIN_MAGIC else load_text(path)
