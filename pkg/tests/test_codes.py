"""CSS codes, file format, and foliation structure."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkpnet import codes


def gf2_rank_oracle(matrix):
    """Rank over GF(2) via the size of the row span (small matrices only)."""
    rows = [int("".join(str(int(b)) for b in row), 2) for row in matrix % 2]
    span = {0}
    for r in rows:
        span |= {s ^ r for s in span}
    return int(np.log2(len(span)))


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 6),
    st.integers(1, 8),
    st.integers(0, 2**31 - 1),
)
def test_gf2_rank_vs_span_oracle(rows, cols, seed):
    rng = np.random.default_rng(seed)
    m = rng.integers(0, 2, size=(rows, cols)).astype(np.uint8)
    assert codes.gf2_rank(m) == gf2_rank_oracle(m)


def test_gf2_rank_edge_cases():
    assert codes.gf2_rank(np.zeros((3, 4), dtype=np.uint8)) == 0
    assert codes.gf2_rank(np.eye(5, dtype=np.uint8)) == 5


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_toric_code_structure(d):
    code = codes.toric_code(d)
    assert code.n == 2 * d * d
    assert code.k == 2
    assert code.distance == d
    code.validate()
    # CSS commutation and logical pairing over GF(2).
    assert not np.any((code.h_x @ code.h_z.T) % 2)
    assert not np.any((code.l_x @ code.h_z.T) % 2)
    assert not np.any((code.l_z @ code.h_x.T) % 2)
    assert np.array_equal((code.l_x @ code.l_z.T) % 2, np.eye(2, dtype=np.intp) % 2)
    # Logical representatives achieve the distance.
    assert set(code.l_x.sum(axis=1)) == {d}
    assert set(code.l_z.sum(axis=1)) == {d}
    # Rank accounting: n - rank(h_x) - rank(h_z) = k.
    assert code.n - codes.gf2_rank(code.h_x) - codes.gf2_rank(code.h_z) == 2
    # Logicals are not stabilizers.
    for row in code.l_x:
        stacked = np.vstack([code.h_x, row])
        assert codes.gf2_rank(stacked) == codes.gf2_rank(code.h_x) + 1


def test_save_load_roundtrip(tmp_path):
    code = codes.toric_code(3)
    path = tmp_path / "toric3.code"
    codes.save_code(code, path)
    text = path.read_text()
    assert text.startswith(codes.FORMAT_HEADER)
    loaded = codes.load_code(path)
    assert loaded.n == code.n and loaded.k == code.k
    assert loaded.distance == code.distance
    assert np.array_equal(loaded.h_x, code.h_x)
    assert np.array_equal(loaded.h_z, code.h_z)
    assert np.array_equal(loaded.l_x, code.l_x)
    assert np.array_equal(loaded.l_z, code.l_z)


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.code"
    path.write_text("not-a-code v9\n")
    with pytest.raises(ValueError):
        codes.load_code(path)


def test_validate_rejects_noncommuting():
    code = codes.toric_code(2)
    h_x = code.h_x.copy()
    h_x[0, 0] ^= 1
    bad = codes.CssCode(
        name="bad",
        h_x=h_x,
        h_z=code.h_z,
        l_x=code.l_x,
        l_z=code.l_z,
        distance=2,
    )
    with pytest.raises(ValueError):
        bad.validate()


@pytest.mark.parametrize("d,rounds", [(2, 2), (3, 3), (3, 1)])
def test_foliation_structure(d, rounds):
    code = codes.toric_code(d)
    fg = codes.foliate(code, rounds=rounds)
    assert fg.rounds == rounds
    assert fg.num_layers == 2 * rounds + 1
    n_anc_x = code.h_x.shape[0]
    n_anc_z = code.h_z.shape[0]
    want = (
        fg.num_layers * code.n
        + (rounds + 1) * n_anc_x
        + rounds * n_anc_z
    )
    assert fg.num_nodes == want
    # Edges respect the bipartition (2-colourable measurement graph).
    labels = fg.bipartition()
    for a, b in fg.edges:
        assert labels[a] != labels[b]
    # Every detector references valid nodes; every logical support too.
    for c in (0, 1):
        for det in fg.detectors[c]:
            assert det and all(0 <= nid < fg.num_nodes for nid in det)
        assert len(fg.logical_supports[c]) == code.k
        for sup in fg.logical_supports[c]:
            assert sup and all(0 <= nid < fg.num_nodes for nid in sup)


def test_foliation_default_rounds_is_distance():
    code = codes.toric_code(3)
    fg = codes.foliate(code)
    assert fg.rounds == 3


def test_foliation_mechanism_split():
    fg = codes.foliate(codes.toric_code(2), rounds=2)
    labels = fg.bipartition()
    # Primal mechanisms all live on the primal side of the bipartition,
    # dual mechanisms on the other; together they cover every node once.
    prim = fg.mechanisms(0)
    dual = fg.mechanisms(1)
    assert all(labels[n] == 1 for n in prim)
    assert all(labels[n] == 0 for n in dual)
    assert sorted(prim + dual) == list(range(fg.num_nodes))


def test_foliate_rejects_bad_rounds():
    with pytest.raises(ValueError):
        codes.foliate(codes.toric_code(2), rounds=0)


def test_toric_rejects_small_distance():
    with pytest.raises(ValueError):
        codes.toric_code(1)
