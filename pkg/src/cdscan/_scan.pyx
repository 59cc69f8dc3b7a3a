# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernel for the schema automaton."""

import numpy as np
cimport numpy as cnp
from cpython.dict cimport PyDict_GetItem
from cpython.object cimport PyObject
from cpython.long cimport PyLong_AsLong

cnp.import_array()


def scan_lists(list docs, dict vocab, int[:, ::1] delta, int[::1] out_start,
               int[::1] out_ids, Py_ssize_t n_patterns):
    cdef Py_ssize_t n_docs = len(docs)
    cdef cnp.int64_t[::1] offsets = np.zeros(n_docs + 1, dtype=np.int64)
    cdef Py_ssize_t cap = 1024
    found_arr = np.empty(cap, dtype=np.int64)
    cdef cnp.int64_t[::1] found = found_arr
    cdef cnp.int64_t[::1] stamp = np.zeros(max(n_patterns, 1), dtype=np.int64)
    cdef Py_ssize_t total = 0, seg, i, j, k, a, b
    cdef int state, sym, p
    cdef cnp.int64_t tmp
    cdef PyObject* hit
    cdef object doc, tok

    for i in range(n_docs):
        doc = docs[i]
        state = 0
        seg = total
        for tok in doc:
            hit = PyDict_GetItem(vocab, tok)
            sym = 0 if hit is NULL else <int>PyLong_AsLong(<object>hit)
            state = delta[state, sym]
            a = out_start[state]
            b = out_start[state + 1]
            for k in range(a, b):
                p = out_ids[k]
                if stamp[p] != i + 1:
                    stamp[p] = i + 1
                    if total == cap:
                        cap *= 2
                        found_arr = np.resize(found_arr, cap)
                        found = found_arr
                    found[total] = p
                    total += 1
        # insertion sort of this document's hits (a handful at most)
        for j in range(seg + 1, total):
            tmp = found[j]
            k = j - 1
            while k >= seg and found[k] > tmp:
                found[k + 1] = found[k]
                k -= 1
            found[k + 1] = tmp
        offsets[i + 1] = total
    return np.asarray(offsets), np.asarray(found_arr[:total]).copy()
