"""Pure-Python kernels.  ``_ckernels.pyx`` mirrors these operation for
operation so both backends produce bit-identical floats."""

from __future__ import annotations

from ..errors import ConfigurationTooLarge

INT64_MAX = 2**63 - 1

# Items whose time-to-finish is within this relative distance of the next
# event complete together, so float residue never spawns micro-events.
FINISH_RTOL = 1e-9


def exclusive_scan(sizes):
    offsets = []
    total = 0
    for s in sizes:
        s = int(s)
        if s < 0:
            raise ValueError("sizes must be non-negative")
        offsets.append(total)
        if total > INT64_MAX - s:
            raise ConfigurationTooLarge("byte total exceeds the signed 64-bit range")
        total += s
    return offsets, total


def endpoint_conflicts(files, offsets, lengths, writers, stripe_size):
    """Count stripes touched by two or more writers.

    Extents in a file must not overlap, so only an extent's first and last
    stripe can be shared; interior stripes belong to it alone.
    """
    touched = {}
    for f, off, n, w in zip(files, offsets, lengths, writers):
        if n <= 0:
            continue
        first = off // stripe_size
        last = (off + n - 1) // stripe_size
        touched.setdefault((f, first), set()).add(w)
        touched.setdefault((f, last), set()).add(w)
    shared = {k: tuple(sorted(v)) for k, v in sorted(touched.items()) if len(v) > 1}
    return len(shared), shared


def fluid_run(req_writer, req_server, req_lock, req_bytes, req_eff, req_phase, req_ndeps,
              wq_ptr, wq_idx,
              flow_src, flow_dst, flow_bytes, flow_phase,
              fq_ptr, fq_idx,
              dep_ptr, dep_idx,
              n_servers, n_locks, n_phases, gather_barrier,
              server_bw, penalty, net_cap, io_threads):
    """Fluid-flow event loop for one flush.

    Requests are per-stripe writes queued per writer node; flows are gather
    transfers queued per source node.  Returns start/begin/end times for
    requests (begin differs from start when a request waited on a stripe
    lock), start/end times for flows, and per-phase gather/end times.
    """
    n_req = len(req_bytes)
    n_flow = len(flow_bytes)
    n_nodes = len(wq_ptr) - 1

    req_start = [-1.0] * n_req
    req_begin = [-1.0] * n_req
    req_end = [-1.0] * n_req
    flow_start = [-1.0] * n_flow
    flow_end = [-1.0] * n_flow
    gather_end = [-1.0] * n_phases
    phase_end = [-1.0] * n_phases

    req_rem = [float(b) for b in req_bytes]
    flow_rem = [float(b) for b in flow_bytes]
    ndeps = [int(d) for d in req_ndeps]
    started = [False] * n_req
    reqs_left = [0] * n_phases
    flows_left = [0] * n_phases
    for i in range(n_req):
        reqs_left[req_phase[i]] += 1
    for f in range(n_flow):
        flows_left[flow_phase[f]] += 1

    wq_head = [wq_ptr[w] for w in range(n_nodes)]
    fq_head = [fq_ptr[n] for n in range(n_nodes)]
    slots = [0] * n_nodes
    out_used = [0] * n_nodes
    lock_holder = [-1] * n_locks
    waiting = []
    run_req = []
    run_flow = []

    t = 0.0
    cur = 0
    phase_open = False

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

        # admit flows
        for n in range(n_nodes):
            while out_used[n] < io_threads and fq_head[n] < fq_ptr[n + 1]:
                f = fq_idx[fq_head[n]]
                if flow_phase[f] != cur:
                    break
                fq_head[n] += 1
                out_used[n] += 1
                flow_start[f] = t
                run_flow.append(f)

        # admit requests
        for w in range(n_nodes):
            j = wq_head[w]
            end = wq_ptr[w + 1]
            while j < end and started[wq_idx[j]]:
                j += 1
            wq_head[w] = j
            while j < end and slots[w] < io_threads:
                i = wq_idx[j]
                j += 1
                if started[i]:
                    continue
                if req_phase[i] != cur:
                    break
                if ndeps[i] > 0 or (gather_barrier and not gathered):
                    continue
                started[i] = True
                slots[w] += 1
                req_start[i] = t
                lk = req_lock[i]
                if lk >= 0 and lock_holder[lk] >= 0:
                    waiting.append(i)
                else:
                    if lk >= 0:
                        lock_holder[lk] = i
                    req_begin[i] = t
                    run_req.append(i)

        if not run_req and not run_flow:
            raise RuntimeError("flush simulation stalled with work outstanding")

        # rates
        srv_cnt = [0] * n_servers
        for i in run_req:
            srv_cnt[req_server[i]] += 1
        link_cnt = [0] * n_nodes
        for f in run_flow:
            link_cnt[flow_src[f]] += 1
            link_cnt[flow_dst[f]] += 1

        req_rate = []
        dt = -1.0
        for i in run_req:
            r = server_bw / srv_cnt[req_server[i]] * req_eff[i]
            if req_lock[i] >= 0:
                r = r / penalty
            req_rate.append(r)
            ttf = req_rem[i] / r
            if dt < 0.0 or ttf < dt:
                dt = ttf
        flow_rate = []
        for f in run_flow:
            a = net_cap / link_cnt[flow_src[f]]
            b = net_cap / link_cnt[flow_dst[f]]
            r = a if a < b else b
            flow_rate.append(r)
            ttf = flow_rem[f] / r
            if dt < 0.0 or ttf < dt:
                dt = ttf

        t = t + dt
        cutoff = dt * (1.0 + FINISH_RTOL)

        still = []
        done_flows = []
        for k in range(len(run_flow)):
            f = run_flow[k]
            if flow_rem[f] / flow_rate[k] <= cutoff:
                flow_rem[f] = 0.0
                flow_end[f] = t
                done_flows.append(f)
            else:
                flow_rem[f] = flow_rem[f] - flow_rate[k] * dt
                still.append(f)
        run_flow = still

        still = []
        done_reqs = []
        for k in range(len(run_req)):
            i = run_req[k]
            if req_rem[i] / req_rate[k] <= cutoff:
                req_rem[i] = 0.0
                req_end[i] = t
                done_reqs.append(i)
            else:
                req_rem[i] = req_rem[i] - req_rate[k] * dt
                still.append(i)
        run_req = still

        for f in done_flows:
            out_used[flow_src[f]] -= 1
            flows_left[flow_phase[f]] -= 1
            for k in range(dep_ptr[f], dep_ptr[f + 1]):
                ndeps[dep_idx[k]] -= 1
        for i in done_reqs:
            slots[req_writer[i]] -= 1
            reqs_left[req_phase[i]] -= 1
            lk = req_lock[i]
            if lk >= 0:
                lock_holder[lk] = -1
                for k in range(len(waiting)):
                    nxt = waiting[k]
                    if req_lock[nxt] == lk:
                        del waiting[k]
                        lock_holder[lk] = nxt
                        req_begin[nxt] = t
                        run_req.append(nxt)
                        break

        if gather_end[cur] < 0.0 and flows_left[cur] == 0:
            gather_end[cur] = t
        if reqs_left[cur] == 0 and flows_left[cur] == 0:
            phase_end[cur] = t
            cur += 1
            phase_open = False

    return req_start, req_begin, req_end, flow_start, flow_end, gather_end, phase_end
