"""Time EM iterations on gamma(4, rate 1/4) claims with the count fixed at n = 1..5.

The dimension of the blocks in the E-step grows with n, so the time per iteration
should grow with it as well.

    python scripts/cpu_time_scaling.py --count 1000 --iters 50 --p 3
"""

import argparse
import time

from mmph.estimate import FitConfig, em_fit
from mmph.simulate import cpu_time_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--iters", type=int, default=50)
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--max-n", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print("n,iterations,seconds,seconds_per_iteration,loglik")
    for n in range(1, args.max_n + 1):
        data = cpu_time_scenario(args.count, n, args.seed)
        cfg = FitConfig(args.p, args.p, max_iters=args.iters, restarts=1, seed=args.seed, ll_rel_tol=0)
        t0 = time.process_time()
        fit = em_fit(data, cfg)
        secs = time.process_time() - t0
        print(f"{n},{fit.iterations_used},{secs:.3f},{secs / fit.iterations_used:.5f},{fit.final_loglik:.4f}")


if __name__ == "__main__":
    main()
