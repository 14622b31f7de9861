"""Compare the per-step cost of adaptation strategies.

The linear update touches two theta entries, so its cost is exact and tiny:
2 x O x L FLOPs. Fine-tuning a transformer between episodes costs millions of
FLOPs for the same behavioral correction.
"""

from blrhac import EnvironmentSpec, ModelSpec, count_flops

print(f"{'env':8s} {'linear infer':>14s} {'linear update':>14s} "
      f"{'tfm infer':>14s} {'tfm episode update':>20s}")
for preset in ("small", "medium", "large"):
    env = EnvironmentSpec.preset(preset)
    ms = ModelSpec("causal_transformer", env, hidden_dim=64, num_layers=3, k=50)
    li = count_flops("linear", "inference", env)
    lu = count_flops("linear", "update", env)
    ti = count_flops(ms, "inference")
    tu = count_flops(ms, "update")
    print(f"{preset:8s} {li:14,d} {lu:14,d} {ti:14,d} {tu:20,d}")

env = EnvironmentSpec.preset("small")
ms = ModelSpec("causal_transformer", env, hidden_dim=64, num_layers=3, k=50)
ratio = count_flops(ms, "update") / count_flops("linear", "update", env)
print(f"\non the small env the transformer update costs {ratio:,.0f}x the linear one")
