"""Compare exact operating characteristics with a simulation of the same plan."""

import numpy as np

from bsplan import DecisionRule, SamplingPlan
from bsplan.cli import load_config
from bsplan.risk import bayes_risk
from bsplan.simulator import empirical_oc


def main(reps=100_000, seed=1):
    cfg = load_config("example1")
    plan, rule = SamplingPlan.equal(4, 0.3, 3), DecisionRule.reliability(0.76)
    exact = bayes_risk(plan, rule, cfg.prior, cfg.costs)
    sim = empirical_oc(plan, rule, cfg.prior, reps, np.random.default_rng(seed), costs=cfg.costs)
    print(f"{'quantity':<14}{'exact':>10}{'simulated':>12}{'s.e.':>9}")
    for key in ("p_accept", "e_failures", "e_duration", "e_inspections"):
        mean, se = sim[key]
        print(f"{key:<14}{getattr(exact, key):10.4f}{mean:12.4f}{se:9.4f}")


if __name__ == "__main__":
    main()
