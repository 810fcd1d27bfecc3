"""Default a(2) x a_p(2) sweep plus the acceptance-style summary statistics."""

import argparse
import time

from railfd.compare import (
    DEFAULT_A2,
    low_demand_error_scale,
    relative_jumps,
    run_sweep,
    spearman,
    write_sweep_csv,
)
from railfd.scenario import ScenarioConfig

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/sweep.json")
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()

    t0 = time.perf_counter()
    reports = run_sweep(ScenarioConfig.load(args.config))
    write_sweep_csv(reports, args.out)
    done = [r for r in reports if r.completed]
    neg = sum(r.relative_error < 0 for r in done)
    print(f"{len(reports)} cells in {time.perf_counter() - t0:.1f} s; {neg}/{len(done)} completed cells underestimate TTT")
    for a2 in DEFAULT_A2:
        row = [r for r in done if r.a2 == a2]
        rho = spearman([r.ap2_ratio for r in row], [abs(r.relative_error) for r in row])
        scale = low_demand_error_scale(reports, a2)
        jump = max(j for _, j in relative_jumps(reports, a2))
        locked = [r.ap2_ratio for r in reports if r.a2 == a2 and r.gridlock]
        print(f"a2={a2:g}: spearman={rho:.3f} max micro jump={jump:.3f} (low-demand error {scale:.4f}) gridlock at {locked}")
