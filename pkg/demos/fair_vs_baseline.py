"""Fairness on one obstacle scenario: FiReFly against the no-fairness baseline.

Five robots start on a circle and share one goal; three obstacles sit on
their straight paths.  The baseline tracks each robot's minimum-energy plan
through the central safety filter.  FiReFly re-plans every step to equalise
the normalised energies, then filters in distributed mode.  Compare the
reached counts with the energies: baseline robots that stall at an
obstacle spend little, which can make the baseline look fairer.

    python3 demos/fair_vs_baseline.py [seed]
"""

import sys

import numpy as np

from firefly import (RunConfig, SafetyConfig, ScenarioSeed, compare, generate, notion_for, run,
                     run_baseline, solo_baseline)


def main(seed: int = 3) -> None:
    spec = generate(ScenarioSeed(seed, 5, 3))
    solo = solo_baseline(spec)
    print(f"scenario seed {seed}: {spec.n_robots} robots, {len(spec.obstacles)} obstacles")
    print("solo energies   ", np.round(solo.energies, 3))

    base = run_baseline(spec)
    for name in ("f1", "f3"):
        notion = notion_for(name)
        rec = run(spec, RunConfig(notion, safety=SafetyConfig.distributed()), solo)
        c = compare(rec, base, notion, solo)
        print(f"\n{name}: baseline {c.f_baseline:.4g} -> firefly {c.f_firefly:.4g}"
              f"  (improved: {str(c.improved).lower()})")
        print("  e baseline    ", np.round(c.e_baseline, 3), f"reached {base.reached_count()}/5")
        print("  e firefly     ", np.round(c.e_firefly, 3), f"reached {rec.reached_count()}/5")
        print("  min barrier   ", f"{rec.min_h():.4g}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
