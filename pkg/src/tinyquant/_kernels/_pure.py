"""Pure-Python kernels. ``_ext.pyx`` implements the same functions."""

from __future__ import annotations

import time

import numpy as np

from ..numrep.posit import PositFormat, posit_decode, posit_encode


def posit_encode_array(x: np.ndarray, n: int, es: int) -> np.ndarray:
    fmt = PositFormat(n, es)
    return np.fromiter((posit_encode(float(v), fmt) for v in x), dtype=np.int64, count=len(x))


def posit_decode_array(codes: np.ndarray, n: int, es: int) -> np.ndarray:
    fmt = PositFormat(n, es)
    return np.fromiter((posit_decode(int(c), fmt) for c in codes), dtype=np.float64, count=len(codes))


def dlx_search(L, R, U, D, C, S, ROW, n_primary: int, deadline: float, check_every: int = 4096):
    """Algorithm X over an array-encoded dancing-links matrix.

    Node 0 is the root, nodes ``1..ncols`` are column headers and columns
    ``1..n_primary`` are the primary (tensor) columns, listed first in the
    header ring. The search always branches on the first uncovered primary
    column and fails a branch as soon as any uncovered primary column is
    empty. Once every primary column is covered, each remaining column owns
    exactly one row, which completes the cover.

    Returns ``(rows, visited, timed_out)``; ``rows`` is ``None`` when no
    cover exists (or the deadline passed).
    """
    L, R, U, D, C, S = (list(map(int, a)) for a in (L, R, U, D, C, S))
    ROW = list(map(int, ROW))

    def cover(c: int) -> None:
        L[R[c]] = L[c]
        R[L[c]] = R[c]
        i = D[c]
        while i != c:
            j = R[i]
            while j != i:
                U[D[j]] = U[j]
                D[U[j]] = D[j]
                S[C[j]] -= 1
                j = R[j]
            i = D[i]

    def uncover(c: int) -> None:
        i = U[c]
        while i != c:
            j = L[i]
            while j != i:
                S[C[j]] += 1
                U[D[j]] = j
                D[U[j]] = j
                j = L[j]
            i = U[i]
        L[R[c]] = c
        R[L[c]] = c

    chosen: list[int] = []  # row node picked at each level
    columns: list[int] = []  # column branched on at each level
    visited = 0
    r = -1
    while True:
        visited += 1
        if visited % check_every == 0 and time.monotonic() > deadline:
            return None, visited, True
        backtrack = False
        if r == -1:
            c = R[0]
            if c == 0 or c > n_primary:
                rows = [ROW[node] for node in chosen]
                c = R[0]
                while c != 0:
                    rows.append(ROW[D[c]])
                    c = R[c]
                return rows, visited, False
            cc = c
            while cc != 0 and cc <= n_primary:
                if S[cc] == 0:
                    backtrack = True
                    break
                cc = R[cc]
            if not backtrack:
                cover(c)
                columns.append(c)
                r = D[c]
        if not backtrack:
            c = columns[-1]
            if r != c:
                chosen.append(r)
                j = R[r]
                while j != r:
                    cover(C[j])
                    j = R[j]
                r = -1
                continue
            uncover(c)
            columns.pop()
        # resume the previous level at its next row
        if not chosen:
            return None, visited, False
        r = chosen.pop()
        j = L[r]
        while j != r:
            uncover(C[j])
            j = L[j]
        r = D[r]
