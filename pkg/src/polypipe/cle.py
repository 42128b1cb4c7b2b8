"""Maximum spanning arborescence decoding with a single-root constraint.

The score matrix is dense: ``scores[d, h]`` is the score of attaching
dependent ``d`` to head ``h``, with node 0 the artificial root.  Decoding
returns, for every complete finite matrix, the arborescence of maximum total
score in which exactly one node attaches to the root.  Ties are broken
deterministically: dependents are processed in increasing index order and on
equal score the smaller head index wins.
"""

from __future__ import annotations

import numpy as np

_NEG = -1e30


def _best_heads(s: np.ndarray) -> np.ndarray:
    heads = np.argmax(s, axis=1)
    heads[0] = 0
    return heads


def _find_cycle(heads: np.ndarray) -> list[int] | None:
    n = len(heads)
    color = np.zeros(n, dtype=np.int8)  # 0 unseen, 1 in progress, 2 done
    color[0] = 2
    for start in range(1, n):
        if color[start]:
            continue
        path = []
        node = start
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = int(heads[node])
        if color[node] == 1:
            cycle = path[path.index(node):]
            return cycle
        for p in path:
            color[p] = 2
    return None


def _cle(s: np.ndarray) -> np.ndarray:
    """Unconstrained maximum arborescence on a sanitized score matrix."""
    n = s.shape[0]
    heads = _best_heads(s)
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads
    in_cycle = np.zeros(n, dtype=bool)
    in_cycle[cycle] = True
    outside = [i for i in range(n) if not in_cycle[i]]  # includes root 0
    m = len(outside) + 1
    cyc_idx = m - 1
    sub = np.full((m, m), _NEG)
    # arcs among outside nodes keep their scores
    for di, d in enumerate(outside):
        for hi, h in enumerate(outside):
            if d != h:
                sub[di, hi] = s[d, h]
    # arcs leaving the cycle: best cycle member as head, per outside dependent
    out_head_choice: dict[int, int] = {}
    for di, d in enumerate(outside):
        if d == 0:
            continue
        best_h, best_v = -1, -np.inf
        for h in cycle:
            if s[d, h] > best_v:
                best_h, best_v = h, s[d, h]
        sub[di, cyc_idx] = best_v
        out_head_choice[d] = best_h
    # arcs entering the cycle: breaking dependent d's cycle arc costs s[d, heads[d]]
    enter_choice: dict[int, int] = {}
    for hi, h in enumerate(outside):
        best_d, best_v = -1, -np.inf
        for d in cycle:
            v = s[d, h] - s[d, heads[d]]
            if v > best_v:
                best_d, best_v = d, v
        sub[cyc_idx, hi] = best_v
        enter_choice[h] = best_d
    sub_heads = _cle(sub)
    result = heads.copy()
    for di, d in enumerate(outside):
        if d == 0:
            continue
        sh = int(sub_heads[di])
        result[d] = outside[sh] if sh != cyc_idx else out_head_choice[d]
    entry_h = outside[int(sub_heads[cyc_idx])]
    entry_d = enter_choice[entry_h]
    result[entry_d] = entry_h  # the broken arc; other cycle arcs stay
    return result


def _sanitize(scores: np.ndarray) -> np.ndarray:
    s = np.array(scores, dtype=float)
    np.fill_diagonal(s, _NEG)
    s[0, :] = _NEG  # the root has no head
    s = np.maximum(s, _NEG)
    return s


def _decode_once(s: np.ndarray) -> np.ndarray:
    return _cle(s)


def cle_decode(scores: np.ndarray) -> list[int]:
    """Heads (for words 1..N) of the best single-root arborescence.

    ``scores`` is an (N+1, N+1) matrix indexed [dependent, head]; row 0 and
    the diagonal are ignored.  All entries must be finite.
    """
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 2:
        raise ValueError("scores must be (N+1, N+1) with N >= 1")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    n = s.shape[0]
    if n == 2:
        return [0]
    s = _sanitize(s)
    heads = _decode_once(s)
    root_children = [d for d in range(1, n) if heads[d] == 0]
    if len(root_children) == 1:
        return heads[1:].tolist()
    # Re-decode once per candidate root child with that arc forced.
    dep_idx = np.arange(1, n)
    best_heads, best_score = None, -np.inf
    for cand in range(1, n):
        sc = s.copy()
        sc[1:, 0] = _NEG
        sc[cand, 0] = s[cand, 0]
        h = _decode_once(sc)
        total = float(s[dep_idx, h[1:]].sum())
        if total > best_score:
            best_heads, best_score = h, total
    return best_heads[1:].tolist()


def tree_score(scores: np.ndarray, heads: list[int]) -> float:
    deps = np.arange(1, len(heads) + 1)
    return float(np.asarray(scores, dtype=float)[deps, heads].sum())


def enumerate_arborescences(n: int) -> np.ndarray:
    """All single-root arborescence head assignments for n words.

    Returns an [M, n] integer array; row m gives heads for words 1..n.
    Intended as an exhaustive oracle for small n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    import itertools

    trees = []
    for heads in itertools.product(range(n + 1), repeat=n):
        if sum(1 for h in heads if h == 0) != 1:
            continue
        ok = True
        for start in range(1, n + 1):
            node, steps = start, 0
            while node != 0 and steps <= n:
                node = heads[node - 1]
                steps += 1
            if node != 0:
                ok = False
                break
        if ok:
            trees.append(heads)
    return np.array(trees, dtype=np.intp)
