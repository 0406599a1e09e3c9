"""Apply both decision rules to a handful of observed tests.

Each data set lists per-interval failure counts by cause for the plan
(n=4, h=0.3, k=3); testing stops once all four units have failed.
"""

import numpy as np

from bsplan import DecisionRule, IntervalData, SamplingPlan
from bsplan.cli import load_config
from bsplan.decision import phi
from bsplan.mle import fit_total_rate
from bsplan.simulator import decide

OBSERVED = {
    "quiet lot": [[0, 0], [0, 0], [0, 1]],
    "mixed lot": [[0, 0], [1, 0], [2, 1]],
    "early failures": [[2, 0], [2, 0]],
}


def main():
    cfg = load_config("example1")
    plan = SamplingPlan.equal(4, 0.3, 3)
    for label, rows in OBSERVED.items():
        data = IntervalData(np.array(rows), plan.n).padded(plan.k)
        est = fit_total_rate(plan, data)
        bayes = decide(plan, data, DecisionRule.bayes(), cfg.prior, cfg.costs)
        rel = decide(plan, data, DecisionRule.reliability(0.76), None, cfg.costs)
        print(f"{label:<15} rates {np.round(est.per_cause, 3)}  R_hat {est.reliability(cfg.costs.t0):.3f}  "
              f"phi {phi(plan, data, cfg.prior, cfg.costs):7.3f}  -> {bayes.value} / {rel.value}")


if __name__ == "__main__":
    main()
