"""Joint versus independent fits on a positively dependent sample and on its flip n -> 3 - n.

    python scripts/negative_dependence.py --count 5000 --iters 500
"""

import argparse

import numpy as np

from mmph.estimate import FitConfig, em_fit, fit_independent
from mmph.jointmodel import JointModel, conditional_mean
from mmph.samples import JointData
from mmph.simulate import simulate

T = np.array([
    [-1.5, 0.0, 0.5, 0.0],
    [0.0, -1.5, 0.0, 1.0],
    [0.0, 0.5, -0.7, 0.0],
    [0.0, 0.0, 0.0, -0.3],
])


def report(label, data, cfg):
    joint = em_fit(data, cfg)
    indep = fit_independent(data, cfg.p, 2, cfg)
    corr = np.corrcoef(data.y, data.n)[0, 1]
    means = [conditional_mean(joint.model, n) for n in (1, 2)]
    print(f"{label}: corr(y, n) = {corr:+.3f}")
    print(f"  joint loglik       {joint.final_loglik:.3f}")
    print(f"  independent loglik {indep.loglik:.3f}")
    print(f"  fitted E[Y | N=1], E[Y | N=2] = {means[0]:.3f}, {means[1]:.3f}")
    return joint.final_loglik - indep.loglik


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--count", type=int, default=5000)
    ap.add_argument("--iters", type=int, default=500)
    ap.add_argument("--restarts", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    model = JointModel.from_arrays([1.0, 0.0, 0.0, 0.0], T, 2)
    data = simulate(model, args.count, args.seed)
    cfg = FitConfig(4, 2, max_iters=args.iters, restarts=args.restarts, seed=args.seed)
    gain = report("original", data, cfg)
    gain_flip = report("flipped", JointData(data.y, 3 - data.n), cfg)
    print(f"joint - independent: {gain:.3f} (original), {gain_flip:.3f} (flipped)")


if __name__ == "__main__":
    main()
