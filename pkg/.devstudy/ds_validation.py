import numpy as np, time, pickle
import kickedgas as kg
from kickedgas.dynamics import run_batch

def run(f, ds, n_s, horizon, n_r, seed=555):
    cfg = kg.SimConfig(gamma_star=4.0, lam=3.03, n_s=n_s, horizon=horizon,
                       n_r=n_r, seed=seed, kick="finite", f=f, delta_s=ds,
                       edge_policy="saturate")
    recs = []
    for lo in range(0, n_r, 64):
        recs += run_batch(cfg, list(range(lo, min(lo+64, n_r))),
                          snapshot_times=(50, horizon))
    s2 = np.mean([r.scalars["sigma2"] for r in recs], axis=0)
    cond = np.mean([r.scalars["condensate"] for r in recs], axis=0)
    al = [r.aliased_at for r in recs if r.aliased_at is not None]
    prof = np.mean([r.profiles[horizon] for r in recs], axis=0)
    prof50 = np.mean([r.profiles[50] for r in recs], axis=0)
    return s2, cond, al, prof, prof50

out = {}
t0 = time.perf_counter()
for ds_inv in (100, 200, 400):
    s2, cond, al, prof, prof50 = run(16.0, 1.0/ds_inv, 4096, 300, 16)
    out[("f16", ds_inv)] = (s2, cond, al, prof, prof50)
    q = np.arange(-2048, 2048)
    # profile reach: largest |q| with population > 1e-10
    reach = np.abs(q[prof > 1e-10]).max() if (prof > 1e-10).any() else 0
    reach50 = np.abs(q[prof50 > 1e-10]).max() if (prof50 > 1e-10).any() else 0
    print(f"f=16 ds=1/{ds_inv}: s2@[50,100,200,300]={s2[50]:.0f},{s2[100]:.0f},{s2[200]:.0f},{s2[300]:.0f} "
          f"cond@300={cond[300]:.4f} aliased={len(al)} first_alias={min(al) if al else None} "
          f"reach(1e-10)@50={reach50} @300={reach} [{time.perf_counter()-t0:.0f}s]", flush=True)
with open(".devstudy/ds_validation.pkl", "wb") as fh:
    pickle.dump(out, fh)
print("PART1 DONE", flush=True)

for ds_inv in (50, 100, 200):
    s2, cond, al, prof, prof50 = run(64.0, 1.0/ds_inv, 4096, 150, 16)
    out[("f64", ds_inv)] = (s2, cond, al, prof, prof50)
    q = np.arange(-2048, 2048)
    reach = np.abs(q[prof > 1e-10]).max() if (prof > 1e-10).any() else 0
    print(f"f=64 ds=1/{ds_inv}: s2@[50,100,150]={s2[50]:.0f},{s2[100]:.0f},{s2[150]:.0f} "
          f"cond@150={cond[150]:.4f} aliased={len(al)} first_alias={min(al) if al else None} "
          f"reach@150={reach} [{time.perf_counter()-t0:.0f}s]", flush=True)
with open(".devstudy/ds_validation.pkl", "wb") as fh:
    pickle.dump(out, fh)
print("DONE")
