"""Growth probe: build a p=2 tower and print per-step sizes and timings."""

import sys
import time

from astower.tower import advance, preamble

prec = int(sys.argv[1]) if len(sys.argv) > 1 else 512
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 6

t0 = time.time()
st = preamble(2, 1, 1, prec)
print("preamble %.1fs" % (time.time() - t0), flush=True)
t1 = time.time()
for k in range(steps):
    try:
        advance(st)
    except Exception as e:
        print("STOPPED at dstep %d: %s: %s" % (k + 1, type(e).__name__, str(e)[:180]),
              flush=True)
        break
    t2 = time.time()
    lv = st.level
    print("dstep %d: %.1fs level %d c=%d cp=%d prec=(%d,%d,%d) vterms=(%d,%d,%d)" % (
        k + 1, t2 - t1, lv, st.c, st.cp,
        st.frames_rs[lv].prec, st.frames_st[lv].prec, st.frames_rt[lv].prec,
        st.frames_rs[lv].v_series.num_terms(), st.frames_st[lv].v_series.num_terms(),
        st.frames_rt[lv].v_series.num_terms()), flush=True)
    t1 = t2
for rec in st.records:
    print(" L%d %s lam=%s m=%d q=%d mp=%d qp=%d c=%d cp=%d %s/%s skip=%d" % (
        rec.level, rec.parity, rec.lam, rec.m, rec.q, rec.mp, rec.qp, rec.c, rec.cp,
        rec.t_path, rec.r_path, len(rec.skipped)), flush=True)
