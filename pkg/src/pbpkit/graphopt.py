"""Cross-layer permutation rewrites over a linear pipeline of layers.

Nodes run in list order. A :class:`PbpLayer` computes ``matvec(m, x) + bias``
with the bias indexed in the layer's output coordinates. Two facts drive the
rewrites: permutations commute with pointwise ops and softmax, and
permutations compose into permutations. Hence in

    PbpLayer(B) -> relu -> PbpLayer(A)

B's output permutation can be folded into A's input permutation, and a final
output permutation can be dropped and handed to the caller as a relabeling.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from . import _binio, pbp, perm
from .errors import DimensionError, NoEliminableOutput, PbpError
from .pbp import PbpMatrix
from .perm import Permutation


@dataclass(frozen=True)
class PbpLayer:
    matrix: PbpMatrix
    bias: np.ndarray | None = None

    def __post_init__(self):
        n_out = self.matrix.shape[0]
        bias = (np.zeros(n_out, dtype=np.float32) if self.bias is None
                else np.array(self.bias, dtype=np.float32).reshape(-1))
        if bias.shape != (n_out,):
            raise DimensionError(f"bias length {bias.size} != layer output {n_out}")
        bias.setflags(write=False)
        object.__setattr__(self, "bias", bias)

    @property
    def in_width(self):
        return self.matrix.shape[1]

    @property
    def out_width(self):
        return self.matrix.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PbpLayer):
            return NotImplemented
        return self.matrix == other.matrix and np.array_equal(self.bias, other.bias)


_POINTWISE = {"relu": lambda x: np.maximum(x, np.float32(0))}


@dataclass(frozen=True)
class Pointwise:
    kind: str = "relu"
    pointwise = True  # class-level capability flag the fusion rule keys on

    def __post_init__(self):
        if self.kind not in _POINTWISE:
            raise PbpError(f"unknown pointwise op {self.kind!r}")

    in_width = out_width = None  # width-preserving


@dataclass(frozen=True)
class Softmax:
    in_width = out_width = None


@dataclass(frozen=True)
class ExplicitPerm:
    perm: Permutation

    @property
    def in_width(self):
        return self.perm.n

    out_width = in_width


@dataclass(frozen=True)
class Dense:
    matrix: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.float32)
        if mat.ndim != 2:
            raise DimensionError("dense node needs a 2-D matrix")
        bias = (np.zeros(mat.shape[0], dtype=np.float32) if self.bias is None
                else np.array(self.bias, dtype=np.float32).reshape(-1))
        if bias.shape != (mat.shape[0],):
            raise DimensionError("dense bias does not match matrix rows")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "bias", bias)

    @property
    def in_width(self):
        return self.matrix.shape[1]

    @property
    def out_width(self):
        return self.matrix.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dense):
            return NotImplemented
        return (np.array_equal(self.matrix, other.matrix)
                and np.array_equal(self.bias, other.bias))


Node = Union[PbpLayer, Pointwise, Softmax, ExplicitPerm, Dense]


@dataclass(frozen=True)
class RelabelRecord:
    """Original output ``o`` relates to produced output ``o'`` by ``o = apply(perm, o')``."""

    perm: Permutation

    def restore(self, produced):
        return perm.apply(self.perm, produced)


@dataclass(frozen=True)
class LayerGraph:
    nodes: tuple = ()
    relabel: RelabelRecord | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        width = None
        for k, node in enumerate(self.nodes):
            if node.in_width is not None:
                if width is not None and node.in_width != width:
                    raise DimensionError(
                        f"node {k} expects width {node.in_width}, previous node "
                        f"produces {width}")
                width = node.out_width
        if self.relabel is not None and width is not None and self.relabel.perm.n != width:
            raise DimensionError("relabel record does not match the output width")

    @property
    def output_width(self):
        for node in reversed(self.nodes):
            if node.out_width is not None:
                return node.out_width
        return None


def _is_pointwise(node) -> bool:
    return getattr(node, "pointwise", False)


def softmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - x.max())
    return e / e.sum()


def execute(g: LayerGraph, a_in) -> tuple[np.ndarray, RelabelRecord]:
    x = np.asarray(a_in, dtype=np.float32)
    if x.ndim != 1:
        raise DimensionError("input must be a vector")
    for k, node in enumerate(g.nodes):
        if node.in_width is not None and x.shape[0] != node.in_width:
            raise DimensionError(
                f"node {k} ({type(node).__name__}) expects input width "
                f"{node.in_width}, got {x.shape[0]}")
        if isinstance(node, PbpLayer):
            x = pbp.matvec(node.matrix, x.astype(np.float32)) + node.bias
        elif isinstance(node, Pointwise):
            x = _POINTWISE[node.kind](x)
        elif isinstance(node, Softmax):
            x = softmax(x)
        elif isinstance(node, ExplicitPerm):
            x = perm.apply(node.perm, x)
        elif isinstance(node, Dense):
            x = node.matrix @ x.astype(np.float32) + node.bias
        else:
            raise PbpError(f"unsupported node type {type(node).__name__}")
    record = g.relabel or RelabelRecord(perm.identity(max(len(x), 1)))
    return x, record


def fusable_pairs(g: LayerGraph) -> list[tuple[int, int]]:
    """Index pairs ``(b, a)``: PBP layer ``b`` reaches PBP layer ``a`` through pointwise ops only."""
    pairs = []
    for b, node in enumerate(g.nodes):
        if not isinstance(node, PbpLayer):
            continue
        a = b + 1
        while a < len(g.nodes) and _is_pointwise(g.nodes[a]):
            a += 1
        if a < len(g.nodes) and isinstance(g.nodes[a], PbpLayer):
            pairs.append((b, a))
    return pairs


def _drop_row_perm(layer: PbpLayer) -> PbpLayer:
    """Same layer emitting block-order outputs; the bias moves into block order."""
    m = layer.matrix
    bias = perm.apply(perm.inverse(m.p_row), layer.bias)
    return PbpLayer(m.with_pivots(p_row=perm.identity(m.p_row.n)), bias)


def fuse_cross_layer(g: LayerGraph) -> LayerGraph:
    nodes = list(g.nodes)
    changed = True
    while changed:
        changed = False
        for b, a in fusable_pairs(LayerGraph(tuple(nodes))):
            producer, consumer = nodes[b], nodes[a]
            p_row = producer.matrix.p_row
            if p_row.is_identity():
                continue
            fused_col = perm.compose(consumer.matrix.p_col, p_row)
            nodes[b] = _drop_row_perm(producer)
            nodes[a] = PbpLayer(consumer.matrix.with_pivots(p_col=fused_col), consumer.bias)
            changed = True
    return LayerGraph(tuple(nodes), g.relabel)


def eliminate_output_perm(g: LayerGraph) -> tuple[LayerGraph, RelabelRecord]:
    nodes = list(g.nodes)
    k = len(nodes) - 1
    if k >= 0 and isinstance(nodes[k], Softmax):
        k -= 1
    if k < 0 or not isinstance(nodes[k], PbpLayer):
        raise NoEliminableOutput(
            "graph must end in a PBP layer, optionally followed by softmax")
    layer = nodes[k]
    dropped = layer.matrix.p_row
    previous = g.relabel.perm if g.relabel is not None else perm.identity(dropped.n)
    if dropped.is_identity():
        record = RelabelRecord(previous)
        return replace(g, relabel=record), record
    nodes[k] = _drop_row_perm(layer)
    record = RelabelRecord(perm.compose(previous, dropped))
    return LayerGraph(tuple(nodes), record), record


def check_identity_fusion(g: LayerGraph) -> list[tuple[tuple[int, int], bool]]:
    """For each fusable pair, whether the fused input permutation is the identity."""
    out = []
    for b, a in fusable_pairs(g):
        fused = perm.compose(g.nodes[a].matrix.p_col, g.nodes[b].matrix.p_row)
        out.append(((b, a), fused.is_identity()))
    return out


def optimize(g: LayerGraph, eliminate_output: bool = True) -> tuple[LayerGraph, RelabelRecord]:
    """Fuse all cross-layer permutations, then drop the output permutation when possible."""
    g = fuse_cross_layer(g)
    if eliminate_output:
        try:
            return eliminate_output_perm(g)
        except NoEliminableOutput:
            pass
    width = g.output_width or 1
    return g, g.relabel or RelabelRecord(perm.identity(width))


# -- JSON graph files --------------------------------------------------------

def _node_to_json(node, k: int, directory: str, stem: str) -> dict:
    if isinstance(node, PbpLayer):
        name = f"{stem}.layer{k}.pbpx"
        pbp.save(node.matrix, os.path.join(directory, name))
        return {"op": "pbp", "matrix": name, "bias": node.bias.tolist()}
    if isinstance(node, Pointwise):
        return {"op": node.kind}
    if isinstance(node, Softmax):
        return {"op": "softmax"}
    if isinstance(node, ExplicitPerm):
        return {"op": "perm", "perm": node.perm.tolist()}
    if isinstance(node, Dense):
        return {"op": "dense", "matrix": node.matrix.tolist(), "bias": node.bias.tolist()}
    raise PbpError(f"cannot serialize {type(node).__name__}")


def graph_to_json(g: LayerGraph, path) -> dict:
    """JSON document for ``g``; PBP layers are written as PBPX files next to ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    stem = os.path.splitext(os.path.basename(path))[0]
    doc = {"nodes": [_node_to_json(n, k, directory, stem) for k, n in enumerate(g.nodes)]}
    if g.relabel is not None:
        doc["relabel"] = g.relabel.perm.tolist()
    return doc


def save_graph(g: LayerGraph, path) -> None:
    doc = graph_to_json(g, path)
    _binio.atomic_write(path, json.dumps(doc, indent=2))


def graph_from_json(doc: dict, directory: str = ".") -> LayerGraph:
    nodes = []
    for k, item in enumerate(doc.get("nodes", [])):
        op = item.get("op")
        if op == "pbp":
            m = pbp.load(os.path.join(directory, item["matrix"]))
            nodes.append(PbpLayer(m, item.get("bias")))
        elif op in _POINTWISE:
            nodes.append(Pointwise(op))
        elif op == "softmax":
            nodes.append(Softmax())
        elif op == "perm":
            nodes.append(ExplicitPerm(Permutation(item["perm"])))
        elif op == "dense":
            nodes.append(Dense(item["matrix"], item.get("bias")))
        else:
            raise PbpError(f"node {k}: unknown op {op!r}")
    relabel = doc.get("relabel")
    return LayerGraph(tuple(nodes), RelabelRecord(Permutation(relabel)) if relabel else None)


def load_graph(path) -> LayerGraph:
    path = os.fspath(path)
    with open(path) as fh:
        doc = json.load(fh)
    return graph_from_json(doc, os.path.dirname(os.path.abspath(path)))


def relabel_to_json(record: RelabelRecord) -> str:
    return json.dumps({"relabel": record.perm.tolist()})


def chain(matrices: Sequence[PbpMatrix], biases: Sequence | None = None,
          activation: str = "relu", final_softmax: bool = False) -> LayerGraph:
    """PBP layers joined by ``activation``, optionally ending in softmax."""
    biases = biases if biases is not None else [None] * len(matrices)
    nodes: list = []
    for k, (m, b) in enumerate(zip(matrices, biases)):
        if k:
            nodes.append(Pointwise(activation))
        nodes.append(PbpLayer(m, b))
    if final_softmax:
        nodes.append(Softmax())
    return LayerGraph(tuple(nodes))
