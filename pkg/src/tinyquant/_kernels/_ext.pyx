# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contracts as ``_pure``."""

import time

import numpy as np

cimport numpy as cnp
from libc.math cimport frexp, isfinite, ldexp, NAN
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()


cdef double _decode(uint64_t code, int n, int es) noexcept nogil:
    cdef uint64_t mask = (<uint64_t>1 << n) - 1
    cdef uint64_t sign_bit = <uint64_t>1 << (n - 1)
    cdef int negative, rest, first, i, run, k, remaining, ebits, fbits
    cdef uint64_t exp, frac
    cdef double value
    code &= mask
    if code == 0:
        return 0.0
    if code == sign_bit:
        return NAN
    negative = (code & sign_bit) != 0
    if negative:
        code = (-code) & mask
    rest = n - 1
    first = (code >> (rest - 1)) & 1
    i = rest - 1
    run = 0
    while i >= 0 and <int>((code >> i) & 1) == first:
        run += 1
        i -= 1
    k = run - 1 if first else -run
    remaining = i if i > 0 else 0
    ebits = es if es < remaining else remaining
    exp = (code >> (remaining - ebits)) & ((<uint64_t>1 << ebits) - 1)
    exp <<= es - ebits
    fbits = remaining - ebits
    frac = code & ((<uint64_t>1 << fbits) - 1)
    value = ldexp(<double>((<uint64_t>1 << fbits) + frac), k * (1 << es) + <int>exp - fbits)
    return -value if negative else value


cdef uint64_t _floor_code(double mag, int n, int es) noexcept nogil:
    cdef int e, scale, k, rlen, blen, width, exp
    cdef double m = frexp(mag, &e)
    cdef uint64_t frac, regime
    scale = e - 1
    k = scale >> es
    exp = scale - k * (1 << es)
    frac = <uint64_t>ldexp(m, 53) - (<uint64_t>1 << 52)
    width = n - 1
    # regime bits followed by es exponent bits, left-aligned in `width` bits;
    # the fraction (52 bits) is shifted in after them.
    if k >= 0:
        rlen = k + 2
    else:
        rlen = 1 - k
    if rlen > width:
        # the regime run alone overflows the code
        return (<uint64_t>1 << width) - 1 if k >= 0 else 0
    if k >= 0:
        regime = ((<uint64_t>1 << (k + 1)) - 1) << 1
    else:
        regime = 1
    cdef int avail = width - rlen
    cdef uint64_t code = regime << avail
    # exponent then the 52 fraction bits; es <= 4 keeps this within 64 bits
    cdef uint64_t tail = ((<uint64_t>exp) << 52) | frac
    blen = es + 52
    if blen > avail:
        code |= tail >> (blen - avail)
    else:
        code |= tail << (avail - blen)
    return code


cdef uint64_t _encode(double x, int n, int es) noexcept nogil:
    cdef uint64_t mask = (<uint64_t>1 << n) - 1
    cdef uint64_t maxpos_code = (<uint64_t>1 << (n - 1)) - 1
    cdef uint64_t code
    cdef double mag, lo, hi, twice, mid
    if not isfinite(x):
        return <uint64_t>1 << (n - 1)
    if x == 0:
        return 0
    mag = -x if x < 0 else x
    if mag >= _decode(maxpos_code, n, es):
        code = maxpos_code
    elif mag <= _decode(1, n, es):
        code = 1
    else:
        code = _floor_code(mag, n, es)
        lo = _decode(code, n, es)
        if mag != lo:
            hi = _decode(code + 1, n, es)
            twice = 2.0 * mag
            mid = lo + hi
            if twice > mid or (twice == mid and (code & 1)):
                code += 1
    if x < 0:
        code = (-code) & mask
    return code


def posit_encode_array(double[::1] x, int n, int es):
    cdef Py_ssize_t i, m = x.shape[0]
    out = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(m):
            o[i] = <int64_t>_encode(x[i], n, es)
    return out


def posit_decode_array(codes, int n, int es):
    cdef int64_t[::1] c = np.ascontiguousarray(codes, dtype=np.int64)
    cdef Py_ssize_t i, m = c.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(m):
            o[i] = _decode(<uint64_t>c[i], n, es)
    return out


cdef inline void _cover(int c, int[::1] L, int[::1] R, int[::1] U, int[::1] D,
                        int[::1] C, int[::1] S) noexcept nogil:
    cdef int i, j
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


cdef inline void _uncover(int c, int[::1] L, int[::1] R, int[::1] U, int[::1] D,
                          int[::1] C, int[::1] S) noexcept nogil:
    cdef int i, j
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


def dlx_search(L_in, R_in, U_in, D_in, C_in, S_in, ROW_in, int n_primary,
               double deadline, long check_every=4096):
    cdef int[::1] L = np.array(L_in, dtype=np.intc)
    cdef int[::1] R = np.array(R_in, dtype=np.intc)
    cdef int[::1] U = np.array(U_in, dtype=np.intc)
    cdef int[::1] D = np.array(D_in, dtype=np.intc)
    cdef int[::1] C = np.array(C_in, dtype=np.intc)
    cdef int[::1] S = np.array(S_in, dtype=np.intc)
    cdef int[::1] ROW = np.array(ROW_in, dtype=np.intc)
    cdef int[::1] chosen = np.empty(n_primary + 1, dtype=np.intc)
    cdef int[::1] columns = np.empty(n_primary + 1, dtype=np.intc)
    cdef int nchosen = 0, ncolumns = 0
    cdef int r = -1, c, cc, j
    cdef bint backtrack
    cdef long visited = 0
    while True:
        visited += 1
        if visited % check_every == 0 and time.monotonic() > deadline:
            return None, visited, True
        backtrack = False
        if r == -1:
            c = R[0]
            if c == 0 or c > n_primary:
                rows = [ROW[chosen[j]] for j in range(nchosen)]
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
                _cover(c, L, R, U, D, C, S)
                columns[ncolumns] = c
                ncolumns += 1
                r = D[c]
        if not backtrack:
            c = columns[ncolumns - 1]
            if r != c:
                chosen[nchosen] = r
                nchosen += 1
                j = R[r]
                while j != r:
                    _cover(C[j], L, R, U, D, C, S)
                    j = R[j]
                r = -1
                continue
            _uncover(c, L, R, U, D, C, S)
            ncolumns -= 1
        if nchosen == 0:
            return None, visited, False
        nchosen -= 1
        r = chosen[nchosen]
        j = L[r]
        while j != r:
            _uncover(C[j], L, R, U, D, C, S)
            j = L[j]
        r = D[r]
