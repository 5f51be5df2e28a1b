# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend for covariant-measurement sampling.

Assembles the weighted outcome vectors in a single pass over the raw draws
and accumulates the rank-c update with one BLAS zherk call per chunk.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport zherk

cnp.import_array()


cdef class CovariantAccumulator:
    cdef int d
    cdef cnp.ndarray _sum  # (d, d) complex128, Fortran order, lower triangle live

    def __init__(self, int d):
        self.d = d
        self._sum = np.zeros((d, d), dtype=np.complex128, order="F")

    def add(self, z, e, idx):
        cdef double[:, :, ::1] zv = z
        cdef double[::1] ev = np.ascontiguousarray(e)
        cdef long[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
        cdef int c = zv.shape[0]
        cdef int d = self.d
        # C-order (c, d) buffer doubles as the Fortran-order (d, c) BLAS input
        buf = np.empty((c, d), dtype=np.complex128)
        cdef double complex[:, ::1] bv = buf
        cdef cnp.ndarray sum_arr = self._sum
        cdef double complex* sp = <double complex*> cnp.PyArray_DATA(sum_arr)
        cdef double complex* bp = <double complex*> cnp.PyArray_DATA(buf)
        cdef int i, k, j
        cdef double re, im, base, nj, scale, sw
        for i in range(c):
            j = <int> iv[i]
            base = 0.0
            for k in range(d):
                base += zv[i, 0, k] * zv[i, 0, k] + zv[i, 1, k] * zv[i, 1, k]
            nj = zv[i, 0, j] * zv[i, 0, j] + zv[i, 1, j] * zv[i, 1, j]
            if nj < 1e-300:
                nj = 1e-300
            scale = sqrt((nj + ev[i]) / nj)
            sw = 1.0 / sqrt(base + ev[i])
            for k in range(d):
                re = zv[i, 0, k]
                im = zv[i, 1, k]
                if k == j:
                    re *= scale
                    im *= scale
                bv[i, k] = (re + 1j * im) * sw
        cdef char uplo = b"L"
        cdef char trans = b"N"
        cdef double alpha = 1.0
        cdef double beta = 1.0
        zherk(&uplo, &trans, &d, &c, &alpha, bp, &d, &beta, sp, &d)

    def finish(self):
        s = np.asarray(self._sum)
        # zherk only maintained the (Fortran) lower triangle
        full = np.tril(s) + np.tril(s, -1).conj().T
        return np.ascontiguousarray(full)
