"""The memorisation trap: distance metrics 'improve' as training data leaks.

Replacing candidate images with exact copies of reference images drags FID
and KID down (apparently better!) while AuthPct falls, correctly flagging
the lost authenticity. Internal repetition barely moves the distances at
all. Combining both signals diagnoses leakage.
"""

from metriscope import PhantomSpec, RngStream, extract_global64, generate_phantom_set
from metriscope.metrics import authpct, fid_from_features, kid, vendi
from metriscope.perturb import ResampleSpec, duplicate_external, duplicate_internal

reference = generate_phantom_set(PhantomSpec(count=300, size=64, seed=1))
candidate = generate_phantom_set(PhantomSpec(count=300, size=64, seed=2,
                                             class_mix=(0.0, 0.0, 1.0)))
ref_features = extract_global64(reference)

print("external duplication (training leakage into the candidate set):")
print(f"{'rate':>6} {'fid':>8} {'kid':>8} {'authpct':>8} {'vendi':>7}")
for i, rate in enumerate([0.0, 0.05, 0.15, 0.30, 0.45]):
    leaked = duplicate_external(candidate, reference,
                                ResampleSpec("external_dup", rate=rate, seed=10 + i))
    feats = extract_global64(leaked)
    print(f"{rate:>6.2f} {fid_from_features(ref_features, feats):>8.3f} "
          f"{kid(ref_features, feats, rng=RngStream(1))[0]:>8.3f} "
          f"{authpct(ref_features, feats):>8.1f} {vendi(feats):>7.3f}")

print("\ninternal duplication (repetition within the candidate set):")
print(f"{'rate':>6} {'fid':>8} {'kid':>8} {'authpct':>8} {'vendi':>7}")
for i, rate in enumerate([0.0, 0.15, 0.45]):
    repeated = duplicate_internal(candidate,
                                  ResampleSpec("internal_dup", rate=rate, seed=20 + i))
    feats = extract_global64(repeated)
    print(f"{rate:>6.2f} {fid_from_features(ref_features, feats):>8.3f} "
          f"{kid(ref_features, feats, rng=RngStream(1))[0]:>8.3f} "
          f"{authpct(ref_features, feats):>8.1f} {vendi(feats):>7.3f}")
