"""Design a life test for the first worked example and inspect the result.

Run with ``python demos/design_walkthrough.py``.  Takes a few seconds.
"""

from bsplan.cli import load_config
from bsplan.optimizer import optimize_plan
from bsplan.prior import expected_acceptance_cost


def main():
    cfg = load_config("example1")
    prior, costs = cfg.prior, cfg.costs

    # Deciding on prior information alone costs min(E[h], C_r).
    eh = expected_acceptance_cost(prior, costs)
    print(f"no test: accept costs {eh:.4f}, reject costs {costs.c_reject:.1f}")

    for kind in ("bayes", "reliability"):
        res = optimize_plan(kind, prior, costs)
        p, r = res.plan, res.report
        rule = "posterior cost rule" if res.rule.r0 is None else f"accept when R_hat > {res.rule.r0}"
        print(f"\n{kind}: test {p.n} units, inspect every {p.h:.2f} up to {p.k} times; {rule}")
        print(f"  Bayes risk {r.total_risk:.5f}  P(accept) {r.p_accept:.4f}  searched {len(res.trace)} plans")
        for name, value in r.decomposition:
            print(f"    {name:<12} {value:9.4f}")


if __name__ == "__main__":
    main()
