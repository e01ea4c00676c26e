"""Video-grouped, class-stratified five-fold split of the synthetic pool."""

import numpy as np

from exprensemble import CLASS_NAMES, fold_view, generate_synthetic, split_five_fold

data = generate_synthetic()
pool = data.pool
plan = split_five_fold(pool, k=5, seed=42)

y = pool.labels
overall = np.bincount(y, minlength=8) / len(y)
print(f"{len(pool)} frames in {len(set(pool.video_ids))} videos")
print("class      " + " ".join(f"{c[:6]:>7}" for c in CLASS_NAMES))
print("overall    " + " ".join(f"{p:7.3f}" for p in overall))
for f in range(plan.k):
    train_set, test_set = fold_view(pool, plan, f)
    prop = np.bincount(test_set.labels, minlength=8) / len(test_set)
    print(f"fold {f + 1} ({len(test_set):4d}) " + " ".join(f"{p:7.3f}" for p in prop))
    # a video never shows up on both sides
    assert not set(train_set.video_ids) & set(test_set.video_ids)
