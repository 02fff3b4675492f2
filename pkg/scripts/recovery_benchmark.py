#!/usr/bin/env python3
"""Monte Carlo recovery check: estimates against closed-form generator truths.

For one structural setting, prints a family x proposition table with the
true reduction, the mean estimate across seeds, the Monte Carlo standard
error of that mean, and the z-score of the deviation. |z| should hover
around 1 and rarely pass 3 — but it is a t-like score with seeds-1
degrees of freedom, so give it ten or more seeds before reading anything
into it. The defaults finish in a few seconds; large --rows with many
--seeds is the slow-but-sharp configuration.
"""

import argparse
import math

import numpy as np

from gapdecomp import AnalysisSpec, StructuralParams, estimate, generate, true_values

PROPS = ("P1", "P2", "P3", "P4")


def setting(discrete: bool) -> StructuralParams:
    if discrete:
        return StructuralParams(
            group_share=0.45,
            x_intercept=0.40, x_group_effect=0.20,
            m_intercept=0.30, m_group_effect=0.15, m_early_effect=0.20,
            y_group_effect=0.30, y_early_effect=0.40, y_target_effect=0.50,
            discrete=True,
        )
    return StructuralParams(
        group_share=0.45,
        x_group_effect=0.50,
        m_group_effect=0.40, m_early_effect=0.30,
        y_group_effect=0.30, y_early_effect=0.40, y_target_effect=0.50,
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=20_000)
    p.add_argument("--seeds", type=int, default=10, help="Monte Carlo repetitions")
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--discrete", action="store_true",
                   help="Bernoulli early/target measures (adds the plug-in family)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    params = setting(args.discrete)
    families = ("SUCCESSIVE", "PRODUCT") + (("PLUGIN",) if args.discrete else ())

    draws = {(f, p): [] for f in families for p in PROPS}
    for k in range(args.seeds):
        d = generate(params, args.rows, seed=args.base_seed + k)
        for family in families:
            for prop in PROPS:
                draws[(family, prop)].append(estimate(d, AnalysisSpec(prop, family)).reduction)

    print(f"rows={args.rows} seeds={args.seeds} "
          f"measures={'discrete' if args.discrete else 'continuous'}")
    print(f"{'family':<12}{'prop':<6}{'truth':>10}{'mean':>10}{'mc_se':>10}{'z':>8}")
    for (family, prop), values in draws.items():
        values = np.asarray(values)
        truth = true_values(params, prop).reduction
        mc_se = values.std(ddof=1) / math.sqrt(args.seeds)
        z = (values.mean() - truth) / mc_se if mc_se else float("inf")
        print(f"{family:<12}{prop:<6}{truth:>10.5f}{values.mean():>10.5f}{mc_se:>10.5f}{z:>8.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
