"""Parser behavior on hand-written and exported files."""

import pytest

from sdp_bridge.sdpa import parse_sdpa_file

from conftest import export_scan

SAMPLE = """\
* comment line
"another comment
2
2
{3, -2}
1.0 0.5
1 1 1 1 1.0
1 1 1 3 0.25
2 2 1 1 0.5
2 2 2 2 0.5
0 1 2 2 -1.0
"""


def test_parse_handwritten(tmp_path):
    path = tmp_path / "sample.dat-s"
    path.write_text(SAMPLE)
    prob = parse_sdpa_file(path)
    assert prob.m == 2
    assert prob.block_sizes == [3, -2]
    assert prob.c == [1.0, 0.5]
    assert prob.entries[0] == [(0, 0, 0, 1.0), (0, 0, 2, 0.25)]
    assert prob.entries[1] == [(1, 0, 0, 0.5), (1, 1, 1, 0.5)]
    assert prob.objective == [(0, 1, 1, -1.0)]
    assert prob.n_total == 5


def test_parse_normalizes_triangle(tmp_path):
    path = tmp_path / "tri.dat-s"
    path.write_text("1\n1\n2\n1.0\n1 1 2 1 0.5\n")
    prob = parse_sdpa_file(path)
    assert prob.entries[0] == [(0, 0, 1, 0.5)]


def test_parse_rejects_garbage(tmp_path):
    path = tmp_path / "bad.dat-s"
    path.write_text("1\n1\n")
    with pytest.raises(ValueError, match="truncated"):
        parse_sdpa_file(path)
    path.write_text("1\n1\n2\n1.0\n1 5 1 1 0.5\n")
    with pytest.raises(ValueError, match="block index"):
        parse_sdpa_file(path)


def test_parse_exported_problem(tmp_path):
    export_scan(tmp_path, level="1", iterations=1)
    dats = sorted(tmp_path.glob("*.dat-s"))
    assert len(dats) == 1
    prob = parse_sdpa_file(dats[0])
    assert prob.block_sizes == [9]  # level-1 moment matrix of the N=1 scenario
    assert prob.m == len(prob.c) == len(prob.entries)
    assert all(r <= c for row in prob.entries for (_, r, c, _) in row)
