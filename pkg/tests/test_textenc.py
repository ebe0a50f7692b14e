"""Recurrent text encoders against scalar and reference implementations."""

import numpy as np
import pytest
import torch

from text2edit import BiGruEncoder, GraphGruEncoder, GruCell, build_vocabulary, tokenize
from text2edit.errors import FormatError, InvalidInputError
from text2edit.textenc import (
    TokenDependencyGraph,
    adjacency_graph,
    load_graph_bank,
    load_pretrained_embeddings,
)


def _numpy_gru_step(cell: GruCell, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Independent re-computation of one GRU step from the cell's parameters."""

    def sigmoid(v):
        return 1.0 / (1.0 + np.exp(-v))

    w_ih = cell.weight_ih.detach().numpy().astype(np.float64)
    w_hh = cell.weight_hh.detach().numpy().astype(np.float64)
    b_ih = cell.bias_ih.detach().numpy().astype(np.float64)
    b_hh = cell.bias_hh.detach().numpy().astype(np.float64)
    hd = cell.hidden_dim
    gi = w_ih @ x + b_ih
    gh = w_hh @ h + b_hh
    r = sigmoid(gi[:hd] + gh[:hd])
    z = sigmoid(gi[hd : 2 * hd] + gh[hd : 2 * hd])
    n = np.tanh(gi[2 * hd :] + r * gh[2 * hd :])
    return (1.0 - z) * n + z * h


def test_gru_cell_matches_scalar_recomputation():
    torch.manual_seed(0)
    rng = np.random.default_rng(0)
    cell = GruCell(6, 5)
    for _ in range(25):
        x = rng.standard_normal(6).astype(np.float32)
        h = rng.standard_normal(5).astype(np.float32)
        got = cell(torch.from_numpy(x), torch.from_numpy(h)).detach().numpy()
        want = _numpy_gru_step(cell, x.astype(np.float64), h.astype(np.float64))
        np.testing.assert_allclose(got, want, atol=1e-6)


def test_gru_cell_matches_torch_reference_cell():
    torch.manual_seed(1)
    cell = GruCell(4, 3)
    ref = torch.nn.GRUCell(4, 3)
    with torch.no_grad():
        ref.weight_ih.copy_(cell.weight_ih)
        ref.weight_hh.copy_(cell.weight_hh)
        ref.bias_ih.copy_(cell.bias_ih)
        ref.bias_hh.copy_(cell.bias_hh)
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = torch.from_numpy(rng.standard_normal((1, 4)).astype(np.float32))
        h = torch.from_numpy(rng.standard_normal((1, 3)).astype(np.float32))
        np.testing.assert_allclose(
            cell(x, h).detach().numpy(), ref(x, h).detach().numpy(), atol=1e-6
        )


def test_bigru_concatenates_directional_final_states():
    torch.manual_seed(2)
    enc = BiGruEncoder(vocab_size=10, embed_dim=4, hidden_dim=3)
    ids = [2, 5, 7]
    out = enc.encode_ids(ids)
    assert out.shape == (6,)

    emb = enc.embedding(torch.tensor(ids))
    h = torch.zeros(3)
    for step in emb:
        h = enc.forward_cell(step, h)
    np.testing.assert_allclose(out[:3].detach().numpy(), h.detach().numpy(), atol=1e-7)
    h = torch.zeros(3)
    for step in emb.flip(0):
        h = enc.backward_cell(step, h)
    np.testing.assert_allclose(out[3:].detach().numpy(), h.detach().numpy(), atol=1e-7)


def test_encode_consumes_token_ids_from_descriptions():
    vocab = build_vocabulary(["increase the brightness a lot"], min_count=1)
    torch.manual_seed(3)
    enc = BiGruEncoder(vocab_size=vocab.size, embed_dim=4, hidden_dim=3)
    desc = tokenize("increase the brightness", vocab)
    np.testing.assert_allclose(
        enc.encode(desc).detach().numpy(),
        enc.encode_ids(desc.tokens).detach().numpy(),
        atol=0,
    )


def test_empty_sequence_and_out_of_range_ids_are_rejected():
    enc = BiGruEncoder(vocab_size=5, embed_dim=4, hidden_dim=3)
    with pytest.raises(InvalidInputError):
        enc.encode_ids([])
    with pytest.raises(IndexError):
        enc.encode_ids([5])
    with pytest.raises(IndexError):
        enc.encode_ids([-1])


def test_zero_vector_matches_output_width():
    enc = BiGruEncoder(vocab_size=5, embed_dim=4, hidden_dim=3)
    z = enc.zero_vector()
    assert z.shape == (6,)
    assert torch.all(z == 0)


def _shared_weight_encoders(vocab_size=12, embed_dim=4, hidden_dim=3, seed=4):
    torch.manual_seed(seed)
    bigru = BiGruEncoder(vocab_size=vocab_size, embed_dim=embed_dim, hidden_dim=hidden_dim)
    graph = GraphGruEncoder(vocab_size=vocab_size, embed_dim=embed_dim, hidden_dim=hidden_dim)
    graph.load_state_dict(bigru.state_dict())
    return bigru, graph


def test_graph_encoder_reduces_to_bigru_on_plain_chains():
    bigru, graph = _shared_weight_encoders()
    rng = np.random.default_rng(5)
    for _ in range(20):
        ids = rng.integers(0, 12, size=rng.integers(1, 9)).tolist()
        a = bigru.encode_ids(ids).detach().numpy()
        b = graph.encode_ids(ids).detach().numpy()
        c = graph.encode_ids(ids, graph=adjacency_graph(len(ids))).detach().numpy()
        np.testing.assert_allclose(a, b, atol=1e-6)
        np.testing.assert_allclose(a, c, atol=1e-6)


def test_graph_encoder_averages_precedent_states():
    _, enc = _shared_weight_encoders(seed=6)
    ids = [2, 3, 4]
    g = TokenDependencyGraph(n=3, edges=((0, 2, "dep"),))
    out = enc.encode_ids(ids, graph=g)

    emb = enc.embedding(torch.tensor(ids))
    zero = torch.zeros(3)
    h0 = enc.forward_cell(emb[0], zero)
    h1 = enc.forward_cell(emb[1], h0)
    h2 = enc.forward_cell(emb[2], (h0 + h1) / 2)
    np.testing.assert_allclose(out[:3].detach().numpy(), h2.detach().numpy(), atol=1e-6)


def test_graph_size_mismatch_is_rejected():
    _, enc = _shared_weight_encoders(seed=7)
    with pytest.raises(InvalidInputError):
        enc.encode_ids([1, 2], graph=adjacency_graph(3))


def test_dependency_graph_validates_edges():
    with pytest.raises(InvalidInputError):
        TokenDependencyGraph(n=2, edges=((1, 1, "x"),))
    with pytest.raises(InvalidInputError):
        TokenDependencyGraph(n=2, edges=((0, 5, "x"),))
    g = TokenDependencyGraph(n=4, edges=((0, 2, "amod"), (3, 1, "dep")))
    assert g.precedents(2, forward=True) == [0, 1]
    assert g.precedents(1, forward=False) == [2, 3]


def test_load_graph_bank_round_trip(tmp_path):
    path = tmp_path / "graphs.json"
    path.write_text('{"make it pop": {"n": 3, "edges": [[0, 2, "dobj"]]}}')
    bank = load_graph_bank(path)
    assert bank["make it pop"].n == 3
    assert bank["make it pop"].edges == ((0, 2, "dobj"),)
    path.write_text('{"bad": {"edges": []}}')
    with pytest.raises(FormatError):
        load_graph_bank(path)


def test_pretrained_embeddings_cover_file_tokens_and_zero_pad(tmp_path):
    vocab = build_vocabulary(["increase the saturation"], min_count=1)
    path = tmp_path / "vectors.txt"
    path.write_text(
        "increase 0.1 0.2 0.3\n"
        "saturation -0.5 0.0 0.5\n"
        "unrelated 9 9 9\n"
    )
    table, coverage = load_pretrained_embeddings(path, vocab, embed_dim=3, seed=0)
    assert coverage == 2
    assert table.shape == (vocab.size, 3)
    np.testing.assert_allclose(table[vocab.id_of("increase")], [0.1, 0.2, 0.3], atol=1e-7)
    np.testing.assert_allclose(table[0], 0.0)
    # uncovered token rows come from the seeded fallback range
    row = table[vocab.id_of("the")]
    assert np.all(np.abs(row) <= 0.05)

    table2, _ = load_pretrained_embeddings(path, vocab, embed_dim=3, seed=0)
    np.testing.assert_array_equal(table, table2)


def test_pretrained_embeddings_reject_wrong_width(tmp_path):
    vocab = build_vocabulary(["increase"], min_count=1)
    path = tmp_path / "vectors.txt"
    path.write_text("increase 0.1 0.2\n")
    with pytest.raises(FormatError, match="line 1"):
        load_pretrained_embeddings(path, vocab, embed_dim=3)


def test_loaded_embeddings_enter_the_encoder():
    vocab = build_vocabulary(["brighten it"], min_count=1)
    enc = BiGruEncoder(vocab_size=vocab.size, embed_dim=3, hidden_dim=2)
    table = np.zeros((vocab.size, 3), dtype=np.float32)
    table[vocab.id_of("brighten")] = (1.0, 2.0, 3.0)
    enc.load_embeddings(table)
    emb = enc.embedding(torch.tensor([vocab.id_of("brighten")]))
    np.testing.assert_allclose(emb.detach().numpy()[0], [1.0, 2.0, 3.0])
    with pytest.raises(InvalidInputError):
        enc.load_embeddings(np.zeros((2, 2), dtype=np.float32))
