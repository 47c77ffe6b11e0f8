import numpy as np, time, pickle
import kickedgas as kg
from kickedgas.dynamics import run_batch

def ens_sigma2(gamma, f, ds, n_s, horizon, n_r, seed=777, lam=3.03):
    cfg = kg.SimConfig(gamma_star=gamma, lam=lam, n_s=n_s, horizon=horizon,
                       n_r=n_r, seed=seed, kick="finite", f=f, delta_s=ds,
                       edge_policy="saturate")
    recs = []
    for lo in range(0, n_r, 64):
        recs += run_batch(cfg, list(range(lo, min(lo+64, n_r))),
                          snapshot_times=(horizon,))
    s2 = np.mean([r.scalars["sigma2"] for r in recs], axis=0)
    cond = np.mean([r.scalars["condensate"] for r in recs], axis=0)
    alias = [r.aliased_at for r in recs if r.aliased_at is not None]
    prof = np.mean([r.profiles[horizon] for r in recs], axis=0)
    return s2, cond, alias, prof

out = {}
t0 = time.perf_counter()
for ds in (1/100, 1/50, 1/25):
    s2, cond, alias, prof = ens_sigma2(4.0, 16.0, ds, 2048, 400, 96)
    out[("f16", ds)] = (s2, cond, len(alias), prof)
    print(f"ds=1/{round(1/ds)}: sigma2@[100,200,400]={s2[100]:.1f},{s2[200]:.1f},{s2[400]:.1f} "
          f"cond@400={cond[400]:.4f} aliased={len(alias)} elapsed={time.perf_counter()-t0:.0f}s", flush=True)

# f=32 and f=64 magnitude probes at ds=1/50
for f in (32.0, 64.0):
    s2, cond, alias, prof = ens_sigma2(4.0, f, 1/50, 4096, 300, 48)
    out[(f"f{int(f)}", 1/50)] = (s2, cond, len(alias), prof)
    print(f"f={f}: sigma2@[100,300]={s2[100]:.1f},{s2[300]:.1f} cond@300={cond[300]:.4f} "
          f"aliased={len(alias)} elapsed={time.perf_counter()-t0:.0f}s", flush=True)

with open(".devstudy/finite_study.pkl", "wb") as fh:
    pickle.dump(out, fh)
print("DONE")
