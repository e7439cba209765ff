# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same algorithms and float operation order as _fallback."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

from ..errors import ConfigurationTooLarge

cnp.import_array()

cdef int64_t INT64_MAX = 9223372036854775807
cdef double FINISH_RTOL = 1e-9


def exclusive_scan(sizes):
    cdef Py_ssize_t n = len(sizes), i
    cdef int64_t total = 0, s
    offsets = [0] * n
    for i in range(n):
        py_s = sizes[i]
        if py_s < 0:
            raise ValueError("sizes must be non-negative")
        if py_s > INT64_MAX:
            raise ConfigurationTooLarge("byte total exceeds the signed 64-bit range")
        s = py_s
        offsets[i] = total
        if total > INT64_MAX - s:
            raise ConfigurationTooLarge("byte total exceeds the signed 64-bit range")
        total += s
    return offsets, total


def endpoint_conflicts(files, offsets, lengths, writers, int64_t stripe_size):
    cdef Py_ssize_t n = len(files), i, m = 0, g, h
    cdef int64_t last
    cdef int64_t[:] f = np.asarray(files, dtype=np.int64)
    cdef int64_t[:] off = np.asarray(offsets, dtype=np.int64)
    cdef int64_t[:] ln = np.asarray(lengths, dtype=np.int64)
    cdef int64_t[:] w = np.asarray(writers, dtype=np.int64)
    cdef int64_t[:] kf = np.empty(2 * n, dtype=np.int64)
    cdef int64_t[:] ks = np.empty(2 * n, dtype=np.int64)
    cdef int64_t[:] kw = np.empty(2 * n, dtype=np.int64)
    for i in range(n):
        if ln[i] <= 0:
            continue
        kf[m] = f[i]; ks[m] = off[i] // stripe_size; kw[m] = w[i]; m += 1
        kf[m] = f[i]; ks[m] = (off[i] + ln[i] - 1) // stripe_size; kw[m] = w[i]; m += 1
    order_np = np.lexsort((np.asarray(kw[:m]), np.asarray(ks[:m]), np.asarray(kf[:m])))
    cdef int64_t[:] order = order_np.astype(np.int64)
    shared = {}
    g = 0
    while g < m:
        h = g
        writers_here = []
        last = -1
        while h < m and kf[order[h]] == kf[order[g]] and ks[order[h]] == ks[order[g]]:
            if h == g or kw[order[h]] != last:
                last = kw[order[h]]
                writers_here.append(last)
            h += 1
        if len(writers_here) > 1:
            shared[(kf[order[g]], ks[order[g]])] = tuple(writers_here)
        g = h
    return len(shared), shared


def fluid_run(req_writer, req_server, req_lock, req_bytes, req_eff, req_phase, req_ndeps,
              wq_ptr, wq_idx,
              flow_src, flow_dst, flow_bytes, flow_phase,
              fq_ptr, fq_idx,
              dep_ptr, dep_idx,
              Py_ssize_t n_servers, Py_ssize_t n_locks, Py_ssize_t n_phases, bint gather_barrier,
              double server_bw, double penalty, double net_cap, int64_t io_threads):
    cdef int64_t[:] rw = np.asarray(req_writer, dtype=np.int64)
    cdef int64_t[:] rs = np.asarray(req_server, dtype=np.int64)
    cdef int64_t[:] rl = np.asarray(req_lock, dtype=np.int64)
    cdef double[:] reff = np.asarray(req_eff, dtype=np.float64)
    cdef int64_t[:] rph = np.asarray(req_phase, dtype=np.int64)
    cdef int64_t[:] ndeps = np.array(req_ndeps, dtype=np.int64)
    cdef int64_t[:] wqp = np.asarray(wq_ptr, dtype=np.int64)
    cdef int64_t[:] wqi = np.asarray(wq_idx, dtype=np.int64)
    cdef int64_t[:] fsrc = np.asarray(flow_src, dtype=np.int64)
    cdef int64_t[:] fdst = np.asarray(flow_dst, dtype=np.int64)
    cdef int64_t[:] fph = np.asarray(flow_phase, dtype=np.int64)
    cdef int64_t[:] fqp = np.asarray(fq_ptr, dtype=np.int64)
    cdef int64_t[:] fqi = np.asarray(fq_idx, dtype=np.int64)
    cdef int64_t[:] dpp = np.asarray(dep_ptr, dtype=np.int64)
    cdef int64_t[:] dpi = np.asarray(dep_idx, dtype=np.int64)

    cdef Py_ssize_t n_req = len(req_bytes), n_flow = len(flow_bytes)
    cdef Py_ssize_t n_nodes = wqp.shape[0] - 1

    rstart_np = np.full(n_req, -1.0); rbegin_np = np.full(n_req, -1.0)
    rend_np = np.full(n_req, -1.0)
    fstart_np = np.full(n_flow, -1.0); fend_np = np.full(n_flow, -1.0)
    gend_np = np.full(n_phases, -1.0); pend_np = np.full(n_phases, -1.0)
    cdef double[:] req_start = rstart_np, req_begin = rbegin_np, req_end = rend_np
    cdef double[:] flow_start = fstart_np, flow_end = fend_np
    cdef double[:] gather_end = gend_np, phase_end = pend_np

    cdef double[:] req_rem = np.array(req_bytes, dtype=np.float64)
    cdef double[:] flow_rem = np.array(flow_bytes, dtype=np.float64)
    cdef char[:] started = np.zeros(max(n_req, 1), dtype=np.int8)
    cdef int64_t[:] reqs_left = np.zeros(max(n_phases, 1), dtype=np.int64)
    cdef int64_t[:] flows_left = np.zeros(max(n_phases, 1), dtype=np.int64)
    cdef Py_ssize_t i, f, k, n, w, j, end, lk, nxt, q
    for i in range(n_req):
        reqs_left[rph[i]] += 1
    for f in range(n_flow):
        flows_left[fph[f]] += 1

    cdef int64_t[:] wq_head = np.array(wqp[:n_nodes], dtype=np.int64)
    cdef int64_t[:] fq_head = np.array(fqp[:n_nodes], dtype=np.int64)
    cdef int64_t[:] slots = np.zeros(max(n_nodes, 1), dtype=np.int64)
    cdef int64_t[:] out_used = np.zeros(max(n_nodes, 1), dtype=np.int64)
    cdef int64_t[:] lock_holder = np.full(max(n_locks, 1), -1, dtype=np.int64)
    cdef int64_t[:] waiting = np.empty(max(n_req, 1), dtype=np.int64)
    cdef Py_ssize_t n_wait = 0
    cdef int64_t[:] run_req = np.empty(max(n_req, 1), dtype=np.int64)
    cdef int64_t[:] still_req = np.empty(max(n_req, 1), dtype=np.int64)
    cdef int64_t[:] done_req = np.empty(max(n_req, 1), dtype=np.int64)
    cdef double[:] req_rate = np.empty(max(n_req, 1), dtype=np.float64)
    cdef Py_ssize_t n_run_req = 0, n_still, n_done_req
    cdef int64_t[:] run_flow = np.empty(max(n_flow, 1), dtype=np.int64)
    cdef int64_t[:] still_flow = np.empty(max(n_flow, 1), dtype=np.int64)
    cdef int64_t[:] done_flow = np.empty(max(n_flow, 1), dtype=np.int64)
    cdef double[:] flow_rate = np.empty(max(n_flow, 1), dtype=np.float64)
    cdef Py_ssize_t n_run_flow = 0, n_done_flow
    cdef int64_t[:] srv_cnt = np.zeros(max(n_servers, 1), dtype=np.int64)
    cdef int64_t[:] link_cnt = np.zeros(max(n_nodes, 1), dtype=np.int64)

    cdef double t = 0.0, dt, r, a, b, ttf, cutoff
    cdef Py_ssize_t cur = 0
    cdef bint phase_open = False, gathered

    while True:
        while cur < n_phases and not phase_open:
            phase_open = True
            if flows_left[cur] == 0:
                gather_end[cur] = t
            if reqs_left[cur] == 0 and flows_left[cur] == 0:
                phase_end[cur] = t
                cur += 1
                phase_open = False
        if cur >= n_phases:
            break
        gathered = gather_end[cur] >= 0.0

        for n in range(n_nodes):
            while out_used[n] < io_threads and fq_head[n] < fqp[n + 1]:
                f = fqi[fq_head[n]]
                if fph[f] != cur:
                    break
                fq_head[n] += 1
                out_used[n] += 1
                flow_start[f] = t
                run_flow[n_run_flow] = f
                n_run_flow += 1

        for w in range(n_nodes):
            j = wq_head[w]
            end = wqp[w + 1]
            while j < end and started[wqi[j]]:
                j += 1
            wq_head[w] = j
            while j < end and slots[w] < io_threads:
                i = wqi[j]
                j += 1
                if started[i]:
                    continue
                if rph[i] != cur:
                    break
                if ndeps[i] > 0 or (gather_barrier and not gathered):
                    continue
                started[i] = 1
                slots[w] += 1
                req_start[i] = t
                lk = rl[i]
                if lk >= 0 and lock_holder[lk] >= 0:
                    waiting[n_wait] = i
                    n_wait += 1
                else:
                    if lk >= 0:
                        lock_holder[lk] = i
                    req_begin[i] = t
                    run_req[n_run_req] = i
                    n_run_req += 1

        if n_run_req == 0 and n_run_flow == 0:
            raise RuntimeError("flush simulation stalled with work outstanding")

        for k in range(n_servers):
            srv_cnt[k] = 0
        for k in range(n_run_req):
            srv_cnt[rs[run_req[k]]] += 1
        for k in range(n_nodes):
            link_cnt[k] = 0
        for k in range(n_run_flow):
            link_cnt[fsrc[run_flow[k]]] += 1
            link_cnt[fdst[run_flow[k]]] += 1

        dt = -1.0
        for k in range(n_run_req):
            i = run_req[k]
            r = server_bw / <double>srv_cnt[rs[i]] * reff[i]
            if rl[i] >= 0:
                r = r / penalty
            req_rate[k] = r
            ttf = req_rem[i] / r
            if dt < 0.0 or ttf < dt:
                dt = ttf
        for k in range(n_run_flow):
            f = run_flow[k]
            a = net_cap / <double>link_cnt[fsrc[f]]
            b = net_cap / <double>link_cnt[fdst[f]]
            r = a if a < b else b
            flow_rate[k] = r
            ttf = flow_rem[f] / r
            if dt < 0.0 or ttf < dt:
                dt = ttf

        t = t + dt
        cutoff = dt * (1.0 + FINISH_RTOL)

        n_still = 0
        n_done_flow = 0
        for k in range(n_run_flow):
            f = run_flow[k]
            if flow_rem[f] / flow_rate[k] <= cutoff:
                flow_rem[f] = 0.0
                flow_end[f] = t
                done_flow[n_done_flow] = f
                n_done_flow += 1
            else:
                flow_rem[f] = flow_rem[f] - flow_rate[k] * dt
                still_flow[n_still] = f
                n_still += 1
        for k in range(n_still):
            run_flow[k] = still_flow[k]
        n_run_flow = n_still

        n_still = 0
        n_done_req = 0
        for k in range(n_run_req):
            i = run_req[k]
            if req_rem[i] / req_rate[k] <= cutoff:
                req_rem[i] = 0.0
                req_end[i] = t
                done_req[n_done_req] = i
                n_done_req += 1
            else:
                req_rem[i] = req_rem[i] - req_rate[k] * dt
                still_req[n_still] = i
                n_still += 1
        for k in range(n_still):
            run_req[k] = still_req[k]
        n_run_req = n_still

        for k in range(n_done_flow):
            f = done_flow[k]
            out_used[fsrc[f]] -= 1
            flows_left[fph[f]] -= 1
            for j in range(dpp[f], dpp[f + 1]):
                ndeps[dpi[j]] -= 1
        for k in range(n_done_req):
            i = done_req[k]
            slots[rw[i]] -= 1
            reqs_left[rph[i]] -= 1
            lk = rl[i]
            if lk >= 0:
                lock_holder[lk] = -1
                for j in range(n_wait):
                    nxt = waiting[j]
                    if rl[nxt] == lk:
                        for q in range(j, n_wait - 1):
                            waiting[q] = waiting[q + 1]
                        n_wait -= 1
                        lock_holder[lk] = nxt
                        req_begin[nxt] = t
                        run_req[n_run_req] = nxt
                        n_run_req += 1
                        break

        if gather_end[cur] < 0.0 and flows_left[cur] == 0:
            gather_end[cur] = t
        if reqs_left[cur] == 0 and flows_left[cur] == 0:
            phase_end[cur] = t
            cur += 1
            phase_open = False

    return (rstart_np.tolist(), rbegin_np.tolist(), rend_np.tolist(),
            fstart_np.tolist(), fend_np.tolist(), gend_np.tolist(), pend_np.tolist())
