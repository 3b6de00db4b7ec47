"""
Probability the first shared jump is a joint jump
=================================================

Couples two linear birth processes with rates theta + h and theta through
the split coupling and asks: what fraction of paths open with a joint
birth rather than a lone one?  For this pair the answer has a closed form,
so the Monte Carlo frequency can be checked exactly.
"""

from pathlib import Path

from coupledssa import (
    Perturbation,
    alpha_delta,
    apply_perturbation,
    parse_network,
    shared_first_jump_frequency,
)

HERE = Path(__file__).resolve().parent
SEED = 20260816

theta, h, x0, delta = 1.0, 0.5, 1, 1.0

net = parse_network((HERE / "networks" / "linear_birth.txt").read_text())
net_x, net_z = apply_perturbation(net, Perturbation("birth", theta + h, theta))

exact = alpha_delta(theta, h, x0, delta)
print(f"closed form: {exact:.6f}")

for n_paths in (1_000, 10_000, 100_000):
    freq, se = shared_first_jump_frequency(
        net_x, net_z, [x0], [x0], delta, n_paths, SEED
    )
    gap = abs(freq - exact) / se
    print(f"{n_paths:7d} paths: {freq:.6f} (se {se:.6f}, {gap:.2f} se off)")

# shrinking the window makes a joint first jump less likely; widening it
# saturates at theta / (theta + h)
print(f"\nsaturation level theta/(theta+h) = {theta / (theta + h):.6f}")
for d in (0.1, 1.0, 10.0, 100.0):
    print(f"delta {d:6.1f}: {alpha_delta(theta, h, x0, d):.6f}")
