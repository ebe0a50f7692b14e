"""Text encoders: token embeddings, a bidirectional GRU, and a graph GRU.

Both encoders map a token sequence to a single vector formed by
concatenating the final hidden states of a forward and a backward pass
(256-dim at the default hidden size of 128 per direction). The graph
encoder generalizes the chain: a token may have extra precedents given by
dependency edges, and its incoming state is the arithmetic mean of all
precedent hidden states. On a graph with no extra edges it reduces
exactly to the bidirectional encoder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .data import PAD_ID, TextDescription, Vocabulary
from .errors import FormatError, InvalidInputError

EMBED_DIM = 200
HIDDEN_DIM = 128


@dataclass(frozen=True)
class TokenDependencyGraph:
    """Dependency edges over token positions; adjacency (i, i+1) is implicit.

    The forward pass uses exactly the edges with src < dst, the backward
    pass exactly those with src > dst; both passes always include the
    (reversed) adjacency chain, so each decomposition is a DAG.
    """

    n: int
    edges: tuple[tuple[int, int, str], ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("graph must have at least one node")
        for src, dst, _ in self.edges:
            if src == dst:
                raise InvalidInputError(f"self-edge at node {src}")
            if not (0 <= src < self.n and 0 <= dst < self.n):
                raise InvalidInputError(f"edge ({src}, {dst}) out of range for n={self.n}")

    def precedents(self, node: int, forward: bool) -> list[int]:
        """Precedent node indices in the given pass, adjacency included."""
        preds = set()
        if forward:
            if node > 0:
                preds.add(node - 1)
            preds.update(s for s, d, _ in self.edges if d == node and s < node)
        else:
            if node < self.n - 1:
                preds.add(node + 1)
            preds.update(s for s, d, _ in self.edges if d == node and s > node)
        return sorted(preds)


def adjacency_graph(n: int) -> TokenDependencyGraph:
    """The trivial chain graph (no extra dependency edges)."""
    return TokenDependencyGraph(n=n)


def load_graph_bank(path: str | Path) -> dict[str, TokenDependencyGraph]:
    """Load a JSON file mapping raw description -> {"n": int, "edges": [[s,d,label],...]}."""
    try:
        payload = json.loads(Path(path).read_text())
        bank = {}
        for raw, obj in payload.items():
            edges = tuple((int(s), int(d), str(label)) for s, d, label in obj.get("edges", []))
            bank[raw] = TokenDependencyGraph(n=int(obj["n"]), edges=edges)
        return bank
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"not a dependency graph file: {path}: {exc}") from exc


def load_pretrained_embeddings(
    path: str | Path,
    vocab: Vocabulary,
    embed_dim: int = EMBED_DIM,
    seed: int = 0,
) -> tuple[np.ndarray, int]:
    """Read whitespace-separated word vectors for the vocabulary.

    Rows for tokens found in the file are copied verbatim; rows for absent
    tokens are drawn uniform from [-0.05, 0.05] with a seeded generator;
    the PAD row is zeroed. Returns (V x embed_dim matrix, coverage count).
    """
    path = Path(path)
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.05, 0.05, size=(vocab.size, embed_dim)).astype(np.float32)
    table[PAD_ID] = 0.0
    coverage = 0
    with path.open() as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if token not in vocab:
                continue
            if len(values) != embed_dim:
                raise FormatError(
                    f"{path} line {line_no}: expected {embed_dim} floats, got {len(values)}"
                )
            token_id = vocab.id_of(token)
            if token_id == PAD_ID:
                continue
            table[token_id] = np.asarray([float(v) for v in values], dtype=np.float32)
            coverage += 1
    return table, coverage


class GruCell(nn.Module):
    """Single GRU step with the standard reset/update/candidate gates."""

    def __init__(self, input_dim: int, hidden_dim: int, dtype=torch.float32):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.weight_ih = nn.Parameter(torch.empty(3 * hidden_dim, input_dim, dtype=dtype))
        self.weight_hh = nn.Parameter(torch.empty(3 * hidden_dim, hidden_dim, dtype=dtype))
        self.bias_ih = nn.Parameter(torch.empty(3 * hidden_dim, dtype=dtype))
        self.bias_hh = nn.Parameter(torch.empty(3 * hidden_dim, dtype=dtype))
        self.reset_parameters()

    def reset_parameters(self):
        bound = 1.0 / math.sqrt(self.hidden_dim)
        for p in self.parameters():
            nn.init.uniform_(p, -bound, bound)

    def forward(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        gi = x @ self.weight_ih.t() + self.bias_ih
        gh = h @ self.weight_hh.t() + self.bias_hh
        i_r, i_z, i_n = gi.chunk(3, dim=-1)
        h_r, h_z, h_n = gh.chunk(3, dim=-1)
        reset = torch.sigmoid(i_r + h_r)
        update = torch.sigmoid(i_z + h_z)
        candidate = torch.tanh(i_n + reset * h_n)
        return (1.0 - update) * candidate + update * h


class _SequenceEncoder(nn.Module):
    """Shared plumbing: embedding table plus one GRU cell per direction."""

    output_dim: int

    def __init__(
        self,
        vocab_size: int,
        embed_dim: int = EMBED_DIM,
        hidden_dim: int = HIDDEN_DIM,
        dtype=torch.float32,
    ):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=PAD_ID, dtype=dtype)
        self.forward_cell = GruCell(embed_dim, hidden_dim, dtype=dtype)
        self.backward_cell = GruCell(embed_dim, hidden_dim, dtype=dtype)
        self.hidden_dim = hidden_dim
        self.output_dim = 2 * hidden_dim
        self.dtype = dtype

    def load_embeddings(self, table: np.ndarray) -> None:
        if table.shape != tuple(self.embedding.weight.shape):
            raise InvalidInputError(
                f"embedding table shape {table.shape} does not match "
                f"{tuple(self.embedding.weight.shape)}"
            )
        with torch.no_grad():
            self.embedding.weight.copy_(torch.as_tensor(table, dtype=self.dtype))

    def _embed(self, token_ids) -> torch.Tensor:
        ids = torch.as_tensor(token_ids, dtype=torch.long)
        if ids.numel() == 0:
            raise InvalidInputError("cannot encode an empty token sequence")
        if int(ids.max()) >= self.embedding.num_embeddings or int(ids.min()) < 0:
            raise IndexError("token id outside the embedding table")
        return self.embedding(ids)

    def encode(self, description: TextDescription, **kwargs) -> torch.Tensor:
        return self.encode_ids(description.tokens, **kwargs)

    def encode_batch(self, descriptions, **kwargs) -> torch.Tensor:
        return torch.stack([self.encode(d, **kwargs) for d in descriptions])

    def zero_vector(self) -> torch.Tensor:
        # stand-in used while pretraining backbones without text conditioning
        return torch.zeros(self.output_dim, dtype=self.dtype)


class BiGruEncoder(_SequenceEncoder):
    """Bidirectional GRU: concat of the two directions' final hidden states."""

    def encode_ids(self, token_ids) -> torch.Tensor:
        embedded = self._embed(token_ids)
        zero = torch.zeros(self.hidden_dim, dtype=self.dtype)
        h_fwd = zero
        for step in embedded:
            h_fwd = self.forward_cell(step, h_fwd)
        h_bwd = zero
        for step in embedded.flip(0):
            h_bwd = self.backward_cell(step, h_bwd)
        return torch.cat([h_fwd, h_bwd])

    forward = encode_ids


class GraphGruEncoder(_SequenceEncoder):
    """GRU over a token dependency DAG, evaluated as forward+backward passes.

    A node's incoming state is the arithmetic mean of the hidden states of
    its precedents (adjacency predecessor plus dependency precedents,
    deduplicated); nodes without precedents start from zeros. Edge labels
    are carried by the graph but do not condition the cell weights.
    """

    def encode_ids(self, token_ids, graph: TokenDependencyGraph | None = None) -> torch.Tensor:
        embedded = self._embed(token_ids)
        n = embedded.shape[0]
        if graph is None:
            graph = adjacency_graph(n)
        if graph.n != n:
            raise InvalidInputError(f"graph has {graph.n} nodes but description has {n} tokens")
        zero = torch.zeros(self.hidden_dim, dtype=self.dtype)

        def run(cell: GruCell, order, forward: bool) -> list:
            hidden: list = [None] * n
            for node in order:
                preds = graph.precedents(node, forward=forward)
                if preds:
                    state = torch.stack([hidden[p] for p in preds]).mean(dim=0)
                else:
                    state = zero
                hidden[node] = cell(embedded[node], state)
            return hidden

        h_fwd = run(self.forward_cell, range(n), forward=True)
        h_bwd = run(self.backward_cell, range(n - 1, -1, -1), forward=False)
        return torch.cat([h_fwd[n - 1], h_bwd[0]])

    forward = encode_ids

