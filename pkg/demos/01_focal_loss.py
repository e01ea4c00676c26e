"""How the focal factor reshapes cross-entropy.

Prints the loss of a correct-class probability under several focusing
strengths, then checks the analytic gradient against a crude numerical one.
"""

import numpy as np

from exprensemble import FocalLossParams, focal_loss, focal_loss_grad, softmax


def vector_with(p_true, k=3):
    p = np.full(8, (1 - p_true) / 7)
    p[k] = p_true
    return p


print("p_true   " + "  ".join(f"gamma={g:<4}" for g in (0, 1, 2, 5)))
for p_true in (0.1, 0.3, 0.6, 0.9, 0.99):
    losses = [focal_loss(vector_with(p_true), 3, FocalLossParams(gamma=g)) for g in (0, 1, 2, 5)]
    print(f"{p_true:<8} " + "  ".join(f"{x:10.5f}" for x in losses))

# Easy frames (p_true near 1) lose almost all their weight once gamma > 0,
# which is the point: rare, hard classes dominate the gradient instead.
rng = np.random.default_rng(0)
z = rng.normal(0, 2, 8)
params = FocalLossParams(alpha=0.25, gamma=2.0)
g = focal_loss_grad(z, 5, params)
h = 1e-5
num = np.array([
    (focal_loss(softmax(z + h * e), 5, params) - focal_loss(softmax(z - h * e), 5, params)) / (2 * h)
    for e in np.eye(8)
])
print("\nanalytic gradient:", np.round(g, 6))
print("numerical        :", np.round(num, 6))
