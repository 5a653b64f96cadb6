"""One full selection round: which feasible risk finds the best candidate?

Fits the 120-member ridge family and a stacked nuisance pair on the
training split, scores every candidate with every risk on the test split,
and compares each risk's ranking against the oracle effect error.
"""

from causalselect import (
    SelectionConfig,
    SimConfig,
    agreement,
    caussim_family,
    run_selection,
    simulate,
)

data = simulate(SimConfig(seed=21, n=5000, theta=1.2))
family = caussim_family(seed=3)
cfg = SelectionConfig(nuisance_variant="stacked", hp_budget=4, seed=2)

run = run_selection(data, family, cfg)
report = agreement(run)

print(f"{'risk':22s} {'kendall':>8s} {'relative':>9s} {'excess effect error':>20s}")
for name in sorted(report.kendall, key=report.kendall.get, reverse=True):
    print(
        f"{name:22s} {report.kendall[name]:+8.3f} "
        f"{report.relative_kendall[name]:+9.3f} {report.excess_tau_risk[name]:20.4f}"
    )
print("\nbest candidate by oracle effect error:", run.risk_table.selected("tau_risk"))
print("picked by the residual-on-residual risk:", run.selected["r_risk"])
print("picked by the plain outcome error:     ", run.selected["mu_risk"])
