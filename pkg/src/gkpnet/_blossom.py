"""Exact maximum-weight matching (blossom algorithm) on dense arrays.

Array-based port of the Galil primal-dual blossom algorithm, following
the classic implementation used by NetworkX (itself after Van Rantwijk),
compiled with numba for the per-trial decoding hot path.  Semantics match
``networkx.max_weight_matching`` with ``maxcardinality=True`` on floats.

Vertices are 0..n-1; blossom ids n..2n-1.  ``eid[v, w]`` gives the edge
index of pair (v, w) or -1.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_NONE = -1


@njit(cache=True)
def _mwm_core(n, ei, ej, ew, adj_ptr, adj_eid, eid, maxcardinality):  # noqa: C901
    m = ei.size
    nb = 2 * n

    maxweight = 0.0
    for k in range(m):
        if ew[k] > maxweight:
            maxweight = ew[k]

    mate = np.full(n, _NONE, dtype=np.int64)
    label = np.zeros(nb, dtype=np.int64)
    labeledge_v = np.full(nb, _NONE, dtype=np.int64)
    labeledge_w = np.full(nb, _NONE, dtype=np.int64)
    inblossom = np.arange(n, dtype=np.int64)
    blossomparent = np.full(nb, _NONE, dtype=np.int64)
    blossombase = np.full(nb, _NONE, dtype=np.int64)
    blossombase[:n] = np.arange(n, dtype=np.int64)
    bestedge = np.full(nb, _NONE, dtype=np.int64)
    dualvar = np.full(n, maxweight, dtype=np.float64)
    blossomdual = np.zeros(nb, dtype=np.float64)
    exists = np.zeros(nb, dtype=np.bool_)
    exists[:n] = True
    allowedge = np.zeros(m, dtype=np.bool_)

    cap = n + 1
    childs = np.full((nb, cap), _NONE, dtype=np.int64)
    childs_len = np.zeros(nb, dtype=np.int64)
    bev = np.full((nb, cap), _NONE, dtype=np.int64)
    bew = np.full((nb, cap), _NONE, dtype=np.int64)
    mybest = np.full((nb, nb), _NONE, dtype=np.int64)
    mybest_len = np.zeros(nb, dtype=np.int64)
    mybest_has = np.zeros(nb, dtype=np.bool_)

    unused = np.arange(n, nb, dtype=np.int64)
    unused_top = np.full(1, n, dtype=np.int64)  # stack size

    queue = np.zeros(16 * n + 64, dtype=np.int64)
    qlen = np.zeros(1, dtype=np.int64)

    leaf_buf = np.zeros(n, dtype=np.int64)
    stack_buf = np.zeros(nb, dtype=np.int64)
    path_buf = np.zeros(nb, dtype=np.int64)
    aug_b = np.zeros(nb, dtype=np.int64)
    aug_v = np.zeros(nb, dtype=np.int64)
    rot_tmp = np.zeros(cap, dtype=np.int64)

    def _slack(k):
        return dualvar[ei[k]] + dualvar[ej[k]] - 2.0 * ew[k]

    def _leaves(b):
        # Collect leaf vertices of blossom b into leaf_buf; return count.
        cnt = 0
        top = 0
        stack_buf[top] = b
        top += 1
        while top > 0:
            top -= 1
            t = stack_buf[top]
            if t < n:
                leaf_buf[cnt] = t
                cnt += 1
            else:
                for c in range(childs_len[t]):
                    stack_buf[top] = childs[t, c]
                    top += 1
        return cnt

    def _queue_push(v):
        if qlen[0] >= queue.size:
            raise RuntimeError("matching queue overflow")
        queue[qlen[0]] = v
        qlen[0] += 1

    def _assign_label(w0, t0, v0):
        # Iterative version: a T-label immediately S-labels the base's mate.
        w, t, v = w0, t0, v0
        while True:
            b = inblossom[w]
            assert label[w] == 0 and label[b] == 0
            label[w] = t
            label[b] = t
            if v != _NONE:
                labeledge_v[w] = v
                labeledge_w[w] = w
                labeledge_v[b] = v
                labeledge_w[b] = w
            else:
                labeledge_v[w] = _NONE
                labeledge_w[w] = _NONE
                labeledge_v[b] = _NONE
                labeledge_w[b] = _NONE
            bestedge[w] = _NONE
            bestedge[b] = _NONE
            if t == 1:
                cnt = _leaves(b)
                for c in range(cnt):
                    _queue_push(leaf_buf[c])
                return
            # t == 2: label the mate of the base with S and continue.
            base = blossombase[b]
            w, t, v = mate[base], 1, base
        # unreachable

    def _scan_blossom(v0, w0):
        # Trace back from v and w; return new blossom base or -1.
        path_len = 0
        base = _NONE
        v, w = v0, w0
        while v != _NONE:
            b = inblossom[v]
            if label[b] & 4:
                base = blossombase[b]
                break
            assert label[b] == 1
            path_buf[path_len] = b
            path_len += 1
            label[b] = 5
            if labeledge_v[b] == _NONE:
                assert mate[blossombase[b]] == _NONE
                v = _NONE
            else:
                assert labeledge_v[b] == mate[blossombase[b]]
                v = labeledge_v[b]
                b = inblossom[v]
                assert label[b] == 2
                v = labeledge_v[b]
            if w != _NONE:
                v, w = w, v
        for c in range(path_len):
            label[path_buf[c]] = 1
        return base

    def _add_blossom(base, v0, w0):
        v, w = v0, w0
        bb = inblossom[base]
        bv = inblossom[v]
        bw = inblossom[w]
        unused_top[0] -= 1
        b = unused[unused_top[0]]
        exists[b] = True
        blossombase[b] = base
        blossomparent[b] = _NONE
        blossomparent[bb] = b
        # Build child and edge lists: first trace v -> base, then w -> base.
        plen = 0
        elen = 1
        e_v0 = np.zeros(cap, dtype=np.int64)
        e_w0 = np.zeros(cap, dtype=np.int64)
        p_tmp = np.zeros(cap, dtype=np.int64)
        e_v0[0] = v
        e_w0[0] = w
        while bv != bb:
            blossomparent[bv] = b
            p_tmp[plen] = bv
            plen += 1
            e_v0[elen] = labeledge_v[bv]
            e_w0[elen] = labeledge_w[bv]
            elen += 1
            assert label[bv] == 2 or (
                label[bv] == 1 and labeledge_v[bv] == mate[blossombase[bv]]
            )
            v = labeledge_v[bv]
            bv = inblossom[v]
        p_tmp[plen] = bb
        plen += 1
        # reverse path and edges
        for c in range(plen):
            childs[b, c] = p_tmp[plen - 1 - c]
        ne = elen
        for c in range(ne):
            bev[b, c] = e_v0[ne - 1 - c]
            bew[b, c] = e_w0[ne - 1 - c]
        clen = plen
        elen = ne
        while bw != bb:
            blossomparent[bw] = b
            childs[b, clen] = bw
            clen += 1
            bev[b, elen] = labeledge_w[bw]
            bew[b, elen] = labeledge_v[bw]
            elen += 1
            assert label[bw] == 2 or (
                label[bw] == 1 and labeledge_v[bw] == mate[blossombase[bw]]
            )
            w = labeledge_v[bw]
            bw = inblossom[w]
        childs_len[b] = clen
        assert label[bb] == 1
        label[b] = 1
        labeledge_v[b] = labeledge_v[bb]
        labeledge_w[b] = labeledge_w[bb]
        blossomdual[b] = 0.0
        # Relabel vertices.
        cnt = _leaves(b)
        for c in range(cnt):
            lv = leaf_buf[c]
            if label[inblossom[lv]] == 2:
                _queue_push(lv)
            inblossom[lv] = b
        # Compute least-slack edges to neighboring S-blossoms.
        bestedgeto = np.full(nb, _NONE, dtype=np.int64)
        for c in range(clen):
            bvv = childs[b, c]
            if bvv >= n and mybest_has[bvv]:
                nlist_len = mybest_len[bvv]
                for q in range(nlist_len):
                    k = mybest[bvv, q]
                    j = ej[k] if inblossom[ei[k]] == b else ei[k]
                    bj = inblossom[j]
                    if (
                        bj != b
                        and label[bj] == 1
                        and (
                            bestedgeto[bj] == _NONE
                            or _slack(k) < _slack(bestedgeto[bj])
                        )
                    ):
                        bestedgeto[bj] = k
                mybest_has[bvv] = False
            else:
                lcnt = _leaves(bvv) if bvv >= n else 1
                if bvv < n:
                    leaf_buf[0] = bvv
                for q in range(lcnt):
                    lv = leaf_buf[q]
                    for a in range(adj_ptr[lv], adj_ptr[lv + 1]):
                        k = adj_eid[a]
                        j = ej[k] if ei[k] == lv else ei[k]
                        bj = inblossom[j]
                        if (
                            bj != b
                            and label[bj] == 1
                            and (
                                bestedgeto[bj] == _NONE
                                or _slack(k) < _slack(bestedgeto[bj])
                            )
                        ):
                            bestedgeto[bj] = k
            bestedge[bvv] = _NONE
        mlen = 0
        for bj in range(nb):
            if bestedgeto[bj] != _NONE:
                mybest[b, mlen] = bestedgeto[bj]
                mlen += 1
        mybest_len[b] = mlen
        mybest_has[b] = True
        bestedge[b] = _NONE
        best_k = _NONE
        best_s = 0.0
        for q in range(mlen):
            k = mybest[b, q]
            s = _slack(k)
            if best_k == _NONE or s < best_s:
                best_k = k
                best_s = s
        bestedge[b] = best_k

    def _free_blossom(b):
        label[b] = 0
        labeledge_v[b] = _NONE
        labeledge_w[b] = _NONE
        bestedge[b] = _NONE
        blossomparent[b] = _NONE
        blossombase[b] = _NONE
        blossomdual[b] = 0.0
        mybest_has[b] = False
        exists[b] = False
        unused[unused_top[0]] = b
        unused_top[0] += 1

    def _expand_blossom(b0, endstage):
        if endstage:
            top = 0
            stack_buf2 = np.zeros(nb, dtype=np.int64)
            stack_buf2[top] = b0
            top += 1
            while top > 0:
                top -= 1
                b = stack_buf2[top]
                for c in range(childs_len[b]):
                    s = childs[b, c]
                    blossomparent[s] = _NONE
                    if s >= n:
                        if blossomdual[s] == 0.0:
                            stack_buf2[top] = s
                            top += 1
                        else:
                            cnt = _leaves(s)
                            for q in range(cnt):
                                inblossom[leaf_buf[q]] = s
                    else:
                        inblossom[s] = s
                _free_blossom(b)
            return
        b = b0
        for c in range(childs_len[b]):
            s = childs[b, c]
            blossomparent[s] = _NONE
            if s >= n:
                cnt = _leaves(s)
                for q in range(cnt):
                    inblossom[leaf_buf[q]] = s
            else:
                inblossom[s] = s
        if label[b] == 2:
            length = childs_len[b]
            entrychild = inblossom[labeledge_w[b]]
            j = 0
            for c in range(length):
                if childs[b, c] == entrychild:
                    j = c
                    break
            if j & 1:
                j -= length
                jstep = 1
            else:
                jstep = -1
            v = labeledge_v[b]
            w = labeledge_w[b]
            while j != 0:
                if jstep == 1:
                    p = bev[b, j % length]
                    q = bew[b, j % length]
                else:
                    q = bev[b, (j - 1) % length]
                    p = bew[b, (j - 1) % length]
                label[w] = 0
                label[q] = 0
                _assign_label(w, 2, v)
                allowedge[eid[p, q]] = True
                j += jstep
                if jstep == 1:
                    v = bev[b, j % length]
                    w = bew[b, j % length]
                else:
                    w = bev[b, (j - 1) % length]
                    v = bew[b, (j - 1) % length]
                allowedge[eid[v, w]] = True
                j += jstep
            bwc = childs[b, j % length]
            label[w] = 2
            label[bwc] = 2
            labeledge_v[w] = v
            labeledge_w[w] = w
            labeledge_v[bwc] = v
            labeledge_w[bwc] = w
            bestedge[bwc] = _NONE
            j += jstep
            while childs[b, j % length] != entrychild:
                bvc = childs[b, j % length]
                if label[bvc] == 1:
                    j += jstep
                    continue
                lv = _NONE
                if bvc >= n:
                    cnt = _leaves(bvc)
                    for q in range(cnt):
                        if label[leaf_buf[q]] != 0:
                            lv = leaf_buf[q]
                            break
                else:
                    if label[bvc] != 0:
                        lv = bvc
                if lv != _NONE:
                    assert label[lv] == 2
                    assert inblossom[lv] == bvc
                    label[lv] = 0
                    label[mate[blossombase[bvc]]] = 0
                    _assign_label(lv, 2, labeledge_v[lv])
                j += jstep
        _free_blossom(b)

    def _augment_blossom(b0, v0):
        top = 0
        aug_b[top] = b0
        aug_v[top] = v0
        top += 1
        while top > 0:
            top -= 1
            b = aug_b[top]
            v = aug_v[top]
            t = v
            while blossomparent[t] != b:
                t = blossomparent[t]
            if t >= n:
                aug_b[top] = t
                aug_v[top] = v
                top += 1
            length = childs_len[b]
            i = 0
            for c in range(length):
                if childs[b, c] == t:
                    i = c
                    break
            j = i
            if i & 1:
                j -= length
                jstep = 1
            else:
                jstep = -1
            while j != 0:
                j += jstep
                t2 = childs[b, j % length]
                if jstep == 1:
                    w = bev[b, j % length]
                    x = bew[b, j % length]
                else:
                    x = bev[b, (j - 1) % length]
                    w = bew[b, (j - 1) % length]
                if t2 >= n:
                    aug_b[top] = t2
                    aug_v[top] = w
                    top += 1
                j += jstep
                t2 = childs[b, j % length]
                if t2 >= n:
                    aug_b[top] = t2
                    aug_v[top] = x
                    top += 1
                mate[w] = x
                mate[x] = w
            # Rotate children so the new base is first.
            if i > 0:
                for c in range(length):
                    rot_tmp[c] = childs[b, (i + c) % length]
                for c in range(length):
                    childs[b, c] = rot_tmp[c]
                for c in range(length):
                    rot_tmp[c] = bev[b, (i + c) % length]
                for c in range(length):
                    bev[b, c] = rot_tmp[c]
                for c in range(length):
                    rot_tmp[c] = bew[b, (i + c) % length]
                for c in range(length):
                    bew[b, c] = rot_tmp[c]
            # The entry child (now childs[b, 0]) may still be pending on the
            # stack; once processed its base becomes v, so set it directly.
            blossombase[b] = v

    def _augment_matching(v0, w0):
        for side in range(2):
            if side == 0:
                s, j = v0, w0
            else:
                s, j = w0, v0
            while True:
                bs = inblossom[s]
                assert label[bs] == 1
                assert (
                    labeledge_v[bs] == _NONE and mate[blossombase[bs]] == _NONE
                ) or (labeledge_v[bs] == mate[blossombase[bs]])
                if bs >= n:
                    _augment_blossom(bs, s)
                mate[s] = j
                if labeledge_v[bs] == _NONE:
                    break
                t = labeledge_v[bs]
                bt = inblossom[t]
                assert label[bt] == 2
                s = labeledge_v[bt]
                j = labeledge_w[bt]
                if bt >= n:
                    _augment_blossom(bt, j)
                mate[j] = s

    # ----- main loop -----
    while True:
        label[:] = 0
        labeledge_v[:] = _NONE
        labeledge_w[:] = _NONE
        bestedge[:] = _NONE
        mybest_has[:] = False
        allowedge[:] = False
        qlen[0] = 0
        for v in range(n):
            if mate[v] == _NONE and label[inblossom[v]] == 0:
                _assign_label(v, 1, _NONE)
        augmented = False
        while True:
            while qlen[0] > 0 and not augmented:
                qlen[0] -= 1
                v = queue[qlen[0]]
                for a in range(adj_ptr[v], adj_ptr[v + 1]):
                    k = adj_eid[a]
                    w = ej[k] if ei[k] == v else ei[k]
                    bv = inblossom[v]
                    bw = inblossom[w]
                    if bv == bw:
                        continue
                    kslack = 0.0
                    if not allowedge[k]:
                        kslack = _slack(k)
                        if kslack <= 0.0:
                            allowedge[k] = True
                    if allowedge[k]:
                        if label[bw] == 0:
                            _assign_label(w, 2, v)
                        elif label[bw] == 1:
                            base = _scan_blossom(v, w)
                            if base != _NONE:
                                _add_blossom(base, v, w)
                            else:
                                _augment_matching(v, w)
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labeledge_v[w] = v
                            labeledge_w[w] = w
                    elif label[bw] == 1:
                        if bestedge[bv] == _NONE or kslack < _slack(bestedge[bv]):
                            bestedge[bv] = k
                    elif label[w] == 0:
                        if bestedge[w] == _NONE or kslack < _slack(bestedge[w]):
                            bestedge[w] = k
            if augmented:
                break
            deltatype = -1
            delta = 0.0
            deltaedge = _NONE
            deltablossom = _NONE
            if not maxcardinality:
                deltatype = 1
                delta = dualvar.min()
            for v in range(n):
                if label[inblossom[v]] == 0 and bestedge[v] != _NONE:
                    d = _slack(bestedge[v])
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(nb):
                if (
                    exists[b]
                    and blossomparent[b] == _NONE
                    and label[b] == 1
                    and bestedge[b] != _NONE
                ):
                    d = _slack(bestedge[b]) / 2.0
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(n, nb):
                if (
                    exists[b]
                    and blossomparent[b] == _NONE
                    and label[b] == 2
                    and (deltatype == -1 or blossomdual[b] < delta)
                ):
                    delta = blossomdual[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                deltatype = 1
                delta = max(0.0, dualvar.min())
            for v in range(n):
                lb = label[inblossom[v]]
                if lb == 1:
                    dualvar[v] -= delta
                elif lb == 2:
                    dualvar[v] += delta
            for b in range(n, nb):
                if exists[b] and blossomparent[b] == _NONE:
                    if label[b] == 1:
                        blossomdual[b] += delta
                    elif label[b] == 2:
                        blossomdual[b] -= delta
            if deltatype == 1:
                break
            elif deltatype == 2:
                allowedge[deltaedge] = True
                v = ei[deltaedge]
                if label[inblossom[v]] != 1:
                    v = ej[deltaedge]
                _queue_push(v)
            elif deltatype == 3:
                allowedge[deltaedge] = True
                _queue_push(ei[deltaedge])
            else:
                _expand_blossom(deltablossom, False)
        if not augmented:
            break
        for b in range(n, nb):
            if (
                exists[b]
                and blossomparent[b] == _NONE
                and label[b] == 1
                and blossomdual[b] == 0.0
            ):
                _expand_blossom(b, True)
    return mate


def max_weight_matching(
    ei: np.ndarray,
    ej: np.ndarray,
    ew: np.ndarray,
    num_vertices: int,
    maxcardinality: bool = True,
) -> np.ndarray:
    """Exact maximum-weight matching; returns mate[v] (-1 if unmatched)."""
    ei = np.ascontiguousarray(ei, dtype=np.int64)
    ej = np.ascontiguousarray(ej, dtype=np.int64)
    ew = np.ascontiguousarray(ew, dtype=np.float64)
    n = int(num_vertices)
    if ei.size == 0 or n == 0:
        return np.full(n, _NONE, dtype=np.int64)
    if np.any(ei == ej):
        raise ValueError("self loops are not allowed")
    m = ei.size
    eid = np.full((n, n), _NONE, dtype=np.int64)
    eid[ei, ej] = np.arange(m)
    eid[ej, ei] = np.arange(m)
    verts = np.concatenate([ei, ej])
    eids = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((eids, verts))  # per vertex, incident edges by id
    adj_eid = eids[order]
    adj_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(adj_ptr, verts + 1, 1)
    adj_ptr = np.cumsum(adj_ptr)
    return _mwm_core(n, ei, ej, ew, adj_ptr, adj_eid, eid, maxcardinality)


def min_weight_perfect_matching(
    ei: np.ndarray, ej: np.ndarray, ew: np.ndarray, num_vertices: int
) -> np.ndarray:
    """Minimum-weight perfect matching via negated maximum-weight matching.

    Raises ValueError if no perfect matching exists.
    """
    mate = max_weight_matching(ei, ej, -np.asarray(ew, dtype=np.float64),
                               num_vertices, maxcardinality=True)
    if np.any(mate < 0):
        raise ValueError("graph admits no perfect matching")
    return mate
