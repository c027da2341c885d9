"""Pure-Python emission kernels; same contract and arithmetic as ``_kernels.pyx``."""

SRT, BILLIARD, VDC, ROTOR = 0, 1, 2, 3

_TWO_M64 = 2.0 ** -64


def van_der_corput(i):
    return int(format(i, "064b")[::-1], 2) * _TWO_M64


def _pick(kind, probs, cum, counts, i):
    if kind == VDC:
        x = van_der_corput(i)
        for a, c in enumerate(cum):
            if x < c:
                return a
        return len(cum) - 1
    best = -1
    for a, p in enumerate(probs):
        if kind == SRT and float(counts[a]) - float(i + 1) * p >= 0.0:
            continue
        if best < 0 or (float(counts[a]) + 1.0) * probs[best] < (float(counts[best]) + 1.0) * p:
            best = a
    return best


def _rotor_count(x, per, off, m):
    r = min(max(x % per - off, 0), m)
    return (x // per) * m + r


def emit_range(kind, indptr, probs, cum, mult, period, counts, served, chi, flows, lo, hi):
    for v in range(lo, hi):
        s, e = int(indptr[v]), int(indptr[v + 1])
        flows[s:e] = 0
        k = int(chi[v])
        if k == 0:
            continue
        i = int(served[v])
        if kind == ROTOR:
            per, off = int(period[v]), 0
            for a in range(s, e):
                m = int(mult[a])
                d = _rotor_count(i + k, per, off, m) - _rotor_count(i, per, off, m)
                flows[a] = d
                counts[a] += d
                off += m
            served[v] = i + k
            continue
        p = probs[s:e].tolist()
        c = cum[s:e].tolist()
        cnt = counts[s:e].tolist()
        fl = [0] * (e - s)
        bad = False
        for _ in range(k):
            best = _pick(kind, p, c, cnt, i)
            if best < 0:
                bad = True
                break
            cnt[best] += 1
            fl[best] += 1
            i += 1
        counts[s:e] = cnt
        flows[s:e] = fl
        served[v] = i
        if bad:
            return v
    return -1


def emit_sequence(kind, probs, cum, mult, period, counts, served, out):
    p, c, m = probs.tolist(), cum.tolist(), mult.tolist()
    cnt = counts.tolist()
    n = len(out)
    j = 0
    while j < n:
        if kind == ROTOR:
            pos, acc, best = served % period, 0, len(m) - 1
            for a, ma in enumerate(m):
                acc += ma
                if pos < acc:
                    best = a
                    break
        else:
            best = _pick(kind, p, c, cnt, served)
            if best < 0:
                break
        cnt[best] += 1
        out[j] = best
        served += 1
        j += 1
    counts[:] = cnt
    return j
