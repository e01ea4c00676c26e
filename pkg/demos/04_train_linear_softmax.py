"""Train a linear-softmax classifier with focal loss, Adam and a cosine schedule."""

import numpy as np

from exprensemble import Dataset, TrainConfig, cosine_lr, predict, train

rng = np.random.default_rng(1)
centers = np.array([[0.0, 4.0], [-3.5, -2.0], [3.5, -2.0]])
y = np.repeat(np.arange(3), 100)
x = centers[y] + rng.normal(0, 0.7, size=(300, 2))
data = Dataset([f"f{i}" for i in range(300)], [f"v{i}" for i in range(300)], x, y)

config = TrainConfig()
print("learning rate at epochs 0, 10, 20, 30:",
      [round(cosine_lr(t, config.epochs, config.initial_lr, config.min_lr), 6) for t in (0, 10, 20, 30)])

model = train(data, config)
acc = np.mean(predict(model, data).labels() == y)
print("mean loss per epoch:", " ".join(f"{v:.3f}" for v in model.loss_history[::5]))
print(f"training accuracy {acc:.3f}")
