"""Fusion weight presets and what weighted averaging does to a single frame."""

import numpy as np

from exprensemble import CLASS_NAMES, PredictionMatrix, fuse_within_fold, list_presets
from exprensemble.fusion import PRESET_SOURCES, reported_single_model_f1

print("reported single-model macro-F1 (reference only):")
for model, vals in reported_single_model_f1().items():
    print(f"  {model:<16} " + " ".join(f"{v:.3f}" for v in vals))

print("\nfusion presets (" + ":".join(PRESET_SOURCES) + "):")
for p in list_presets():
    print(f"  {p.name:<18} {p.weights.ratio():<12} reported F1 {p.reported_f1:.3f}")

# Three models disagree on one frame. The weights decide who wins.
probs = {
    "inception_v1": [0.05, 0.0, 0.0, 0.50, 0.05, 0.0, 0.40, 0.0],
    "resnet50": [0.0, 0.0, 0.0, 0.30, 0.0, 0.0, 0.65, 0.05],
    "efficientnet_b0": [0.0, 0.0, 0.05, 0.45, 0.0, 0.05, 0.40, 0.05],
}
sources = [PredictionMatrix(name, ["frame0"], ["video0"], np.array([p])) for name, p in probs.items()]
for w in ((1, 1, 1), (0.5, 1.1, 0.5), (1.2, 0.4, 1.2)):
    fused = fuse_within_fold(sources, w)
    print(f"weights {w}: {CLASS_NAMES[fused.labels()[0]]:<10} {np.round(fused.probs[0], 3)}")
