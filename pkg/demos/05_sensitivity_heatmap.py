"""Build the standardized sensitivity heatmap for a perturbation sweep.

Each condition gets a full metric report; percent changes from the
unperturbed baseline are z-scored per metric across conditions and emitted
as CSV, JSON, and an SVG heatmap. The boundary-blur column comes out orders
of magnitude weaker than the noise columns for the distance metrics: the
blind spot this toolkit exists to expose. (The radial-gradient column is
only partially blind here: the built-in features include tail statistics
such as excess kurtosis, and stretching the bright lesion tail is exactly
what a tail statistic notices. Sensitivity always belongs to the feature
set, not the metric formula alone.)
"""

from pathlib import Path

from metriscope import MetricConfig, PhantomSpec, RngStream, evaluate_all, extract_global64, generate_phantom_set
from metriscope.analysis import build_sensitivity, emit_heatmap
from metriscope.perturb import apply_perturbation, parse_perturbation, spec_label

Path("out").mkdir(exist_ok=True)

reference = generate_phantom_set(PhantomSpec(count=150, size=64, seed=11))
candidate = generate_phantom_set(PhantomSpec(count=150, size=64, seed=12))
ref_features = extract_global64(reference)

sweep = [
    {"kind": "gaussian", "params": {"sigma": 0.05}, "seed": 1},
    {"kind": "rician", "params": {"sigma": 0.05}, "seed": 2},
    {"kind": "boundary_blur", "params": {"sigma_level": 3.0}},
    {"kind": "radial_gradient", "params": {"sigma_level": 2}},
    {"kind": "external_dup", "params": {"rate": 0.3}, "seed": 3},
    {"kind": "class_proportions", "params": {"targets": {"1": 0.5, "2": 0.5, "3": 0.0}}, "seed": 4},
]

config = MetricConfig(enabled=("fid", "kid", "mmd_rbf", "asw", "precision",
                               "recall", "coverage", "authpct", "vendi"))

def evaluate(image_set):
    return evaluate_all(ref_features, extract_global64(image_set),
                        config=config, rng=RngStream(99),
                        real_name=reference.name, gen_name=image_set.name)

baseline = evaluate(candidate)
conditions = []
for doc in sweep:
    spec = parse_perturbation(doc)
    perturbed = apply_perturbation(candidate, spec, reference=reference)
    conditions.append((spec_label(spec), evaluate(perturbed)))
    print(f"evaluated {spec_label(spec)}")

table = build_sensitivity(baseline, conditions)
for fmt in ("csv", "json", "svg"):
    emit_heatmap(table, fmt, f"out/sensitivity.{fmt}")
    print(f"wrote out/sensitivity.{fmt}")

print("\nz-scores (rows = metrics, columns = conditions):")
header = " ".join(f"{c[:14]:>15}" for c in table.conditions)
print(f"{'':<12}{header}")
for i, name in enumerate(table.metrics):
    row = " ".join(f"{z:>15.2f}" for z in table.zscore[i])
    print(f"{name:<12}{row}")
