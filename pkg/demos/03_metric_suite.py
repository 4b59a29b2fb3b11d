"""Run the full metric suite on one (reference, candidate) pair.

A single evaluate_all call produces every enabled metric with its
direction-of-better, estimator spread where applicable, and caveat flags.
"""

from metriscope import (
    MetricConfig,
    PhantomSpec,
    RngStream,
    extract_global64,
    extract_spatial48,
    evaluate_all,
    generate_phantom_set,
    partition_dataset,
)

reference = generate_phantom_set(PhantomSpec(count=200, size=64, seed=5))
candidate = generate_phantom_set(PhantomSpec(count=200, size=64, seed=6,
                                             class_mix=(0.5, 0.3, 0.2)))

# ct_score detects copying against a train/test split of the real data
train_set, test_set = partition_dataset(reference, [0.5, 0.5], RngStream(0))

report = evaluate_all(
    extract_global64(test_set),
    extract_global64(candidate),
    config=MetricConfig(ct_cells=2),
    rng=RngStream(42),
    real_spatial=extract_spatial48(test_set),
    gen_spatial=extract_spatial48(candidate),
    train=extract_global64(train_set),
    real_name=test_set.name,
    gen_name=candidate.name,
)

print(f"{'metric':<18} {'value':>12} {'direction':<14} {'std':>10}  flags")
for entry in report.entries:
    std = f"{entry.std:.4g}" if entry.std is not None else ""
    print(f"{entry.name:<18} {entry.value:>12.5g} {entry.direction:<14} "
          f"{std:>10}  {', '.join(entry.flags)}")
