import math

import numpy as np
import pytest

from vpcluster.geometry import euler_to_orientation, orientation_from_direction
from vpcluster.graph import (
    AffinityMatrix,
    FrameGraph,
    Window,
    build_affinity,
    build_frame_graph,
    iter_windows,
    seconds_to_frames,
    window_affinity,
    write_edge_list,
)


def _graph(n, edges):
    a = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        a[i, j] = a[j, i] = True
    return FrameGraph(a)


def test_frame_graph_identical_users_complete():
    o = euler_to_orientation(0.3, 0.1, 0.0)
    g = build_frame_graph([o] * 4, math.pi / 10)
    assert g.adjacency.sum() == 12
    assert not g.adjacency.diagonal().any()


def test_frame_graph_closed_threshold():
    g_th = math.pi / 10
    g = build_frame_graph([euler_to_orientation(0.0, 0, 0), euler_to_orientation(g_th, 0, 0)], g_th)
    assert g.adjacency[0, 1] and g.adjacency[1, 0]
    g = build_frame_graph([euler_to_orientation(0.0, 0, 0), euler_to_orientation(g_th + 1e-9, 0, 0)], g_th)
    assert not g.adjacency[0, 1]


def test_frame_graph_antipodal():
    g = build_frame_graph([euler_to_orientation(0.0, 0, 0), euler_to_orientation(math.pi, 0, 0)],
                          math.pi / 10)
    assert not g.adjacency.any()


def test_frame_graph_input_forms():
    rng = np.random.default_rng(0)
    d = rng.standard_normal((6, 3))
    os_ = [orientation_from_direction(v) for v in d]
    q = np.array([o.as_array() for o in os_])
    a = build_frame_graph(os_, 1.0).adjacency
    assert np.array_equal(a, build_frame_graph(q, 1.0).adjacency)
    assert np.array_equal(a, build_frame_graph(d, 1.0).adjacency)
    with pytest.raises(ValueError):
        build_frame_graph(d, 0.0)
    with pytest.raises(ValueError):
        build_frame_graph(np.zeros((3, 5)), 1.0)


def test_frame_graph_rotation_invariant():
    rng = np.random.default_rng(1)
    d = rng.standard_normal((15, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    for _ in range(10):
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        assert np.array_equal(build_frame_graph(d, 0.8).adjacency,
                              build_frame_graph(d @ q.T, 0.8).adjacency)


def test_frame_graph_validation():
    with pytest.raises(ValueError):
        FrameGraph(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        FrameGraph(np.eye(2))


def test_affinity_two_of_three():
    frames = [_graph(3, [(0, 1)]), _graph(3, [(0, 1), (1, 2)]), _graph(3, [])]
    a = build_affinity(frames, tau=2)
    assert a.adjacency[0, 1]
    assert not a.adjacency[1, 2]
    assert (a.length, a.tau) == (3, 2)
    assert a.edges() == [(0, 1)]


def test_affinity_tau_equals_t_all_ones():
    full = np.ones((4, 4), dtype=bool) & ~np.eye(4, dtype=bool)
    a = build_affinity([FrameGraph(full)] * 5, tau=5)
    assert np.array_equal(a.adjacency, full)


def test_affinity_single_frame_identity():
    rng = np.random.default_rng(3)
    up = np.triu(rng.random((8, 8)) < 0.4, 1)
    g = FrameGraph(up | up.T)
    assert np.array_equal(build_affinity([g], 1).adjacency, g.adjacency)


def test_affinity_monotone_in_tau():
    rng = np.random.default_rng(4)
    graphs = []
    for _ in range(6):
        up = np.triu(rng.random((10, 10)) < 0.5, 1)
        graphs.append(FrameGraph(up | up.T))
    prev = None
    for tau in range(1, 7):
        a = build_affinity(graphs, tau).adjacency
        if prev is not None:
            assert not np.any(a & ~prev)
        prev = a


def test_affinity_errors():
    with pytest.raises(ValueError):
        build_affinity([_graph(3, []), _graph(4, [])], 1)
    with pytest.raises(ValueError):
        build_affinity([_graph(3, [])] * 2, 3)
    with pytest.raises(ValueError):
        build_affinity([], 1)
    with pytest.raises(ValueError):
        AffinityMatrix(np.zeros((2, 2), dtype=bool), 0, 2, 0)


@pytest.mark.parametrize("sec,fps,frames", [(3.0, 30.0, 90), (1.8, 30.0, 54), (0.05, 30.0, 2),
                                            (1.0 / 60, 30.0, 1), (1.8, 29.97, 54)])
def test_seconds_to_frames(sec, fps, frames):
    assert seconds_to_frames(sec, fps) == frames


def test_iter_windows_tiles():
    ws = list(iter_windows(300, 90, 54))
    assert [w.start for w in ws] == [0, 90, 180, 270]
    assert ws[-1] == Window(270, 30, 18)
    assert all(w.tau == 54 for w in ws[:-1])
    assert sum(w.length for w in ws) == 300


def test_iter_windows_stride_and_errors():
    ws = list(iter_windows(10, 4, 2, stride=3))
    assert [(w.start, w.length) for w in ws] == [(0, 4), (3, 4), (6, 4)]
    assert list(iter_windows(5, 5, 5)) == [Window(0, 5, 5)]
    with pytest.raises(ValueError):
        list(iter_windows(10, 4, 5))
    with pytest.raises(ValueError):
        list(iter_windows(10, 4, 2, stride=0))


def test_window_affinity_matches_manual():
    rng = np.random.default_rng(6)
    d = rng.standard_normal((5, 4, 3))
    d /= np.linalg.norm(d, axis=2, keepdims=True)
    w = Window(1, 3, 2)
    a = window_affinity(d, w, 1.2)
    manual = build_affinity([build_frame_graph(d[:, k], 1.2) for k in (1, 2, 3)], 2)
    assert np.array_equal(a.adjacency, manual.adjacency)
    assert a.start == 1


def test_write_edge_list(tmp_path):
    a = build_affinity([_graph(3, [(0, 2), (1, 2)])], 1)
    write_edge_list(a, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "i,j\n0,2\n1,2\n"
