"""Run a small campaign and summarize agreement by overlap tertile.

Campaigns repeat the whole pipeline over seeded instances and emit one CSV
row per (instance, procedure, risk). The same run is reproducible
byte-for-byte regardless of worker count. Shipped desk-scale recipes:
``fig4_desk`` (risk comparison), ``fig6_desk`` (shared vs separate
nuisance set), ``fig7_desk`` (linear vs stacked nuisances), ``fig8_desk``
(train/test ratio sweep).
"""

import csv
from collections import defaultdict

import numpy as np

from causalselect import recipe, run_campaign, tertile_bucket

cfg = recipe("fig4_desk", n_instances=8)
out = run_campaign(cfg, "campaign_results.csv", jobs=2, quiet=True)
print(f"campaign {cfg.name!r} -> {out}")

with open(out) as fh:
    rows = list(csv.DictReader(fh))

by_instance = {int(r["instance_id"]): float(r["ntv"]) for r in rows}
buckets = dict(
    zip(sorted(by_instance), tertile_bucket([by_instance[i] for i in sorted(by_instance)]))
)

kendalls = defaultdict(list)
for row in rows:
    bucket = buckets[int(row["instance_id"])]
    kendalls[(row["risk_name"], bucket)].append(float(row["kendall"]))

print(f"\n{'risk':22s} {'strong':>8s} {'weak':>8s}   (median agreement with the oracle ranking)")
for risk in ("r_risk", "u_risk", "tau_risk_ipw", "mu_risk_ipw", "mu_risk"):
    strong = np.median(kendalls.get((risk, "strong"), [np.nan]))
    weak = np.median(kendalls.get((risk, "weak"), [np.nan]))
    print(f"{risk:22s} {strong:8.3f} {weak:8.3f}")
