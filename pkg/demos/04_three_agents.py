"""A reduced three-agent comparison.

Runs shortened batches of the observations-only baseline, the expert
echo-GVF agent, and the meta-gradient agent, then writes the bar chart the
full-size experiment produces. Full-length batches (30 trials x 1M steps)
are driven by `metagvf compare` or the acceptance suite.
"""

from metagvf.chart import write_comparison_svg
from metagvf.experiment import format_summary, make_config, run_batch

entries = []
for kind in ("obs-only", "expert", "meta"):
    cfg = make_config(kind, total_steps=120_000, eval_steps=1_000,
                      n_trials=5, base_seed=0)
    summary = run_batch(cfg, workers=2)
    entries.append((kind, summary.eval_mean, summary.eval_se))
    print(format_summary(summary))
    print()

write_comparison_svg("comparison_demo.svg", entries,
                     title="Mean evaluation reward (reduced run)")
print("wrote comparison_demo.svg")
print("note: at this reduced horizon the expert agent has usually not yet")
print("locked its prediction code; the full-length run is the real figure.")
