"""
Baselines, significance and cross-validation
============================================
"""

from implicit_disco import ModelConfig, TrainConfig, train
from implicit_disco.evaluation import (
    accuracy, bootstrap_test, cross_validate, majority_baseline, predict_dataset, render_comparison,
)
from implicit_disco.synthetic import marker_task, toy_vectors

table = toy_vectors(k=10)
train_set, dev_set, test_set = marker_task(300, seed=1), marker_task(80, seed=2), marker_task(80, seed=3)

baseline = majority_baseline(train_set, test_set)
cfg = ModelConfig("FF", "sum", k=10, hidden_dim=10, num_labels=2)
model, _ = train(train_set, dev_set, cfg, TrainConfig(learning_rate=0.05, max_epochs=20), table)
system = predict_dataset(model, test_set, table)

print(render_comparison([("Majority", accuracy(baseline)), ("FF sum", accuracy(system))], title="Test accuracy"))

# one-sided paired bootstrap: small p means the system really beats the baseline
print("p =", bootstrap_test(system, baseline))
print("p (same system) =", bootstrap_test(system, system))

# 7-fold CV; the fold after each held-out fold serves as dev
small = marker_task(140, seed=4)
cv = cross_validate(small, folds=7, model_config=cfg, train_config=TrainConfig(learning_rate=0.05, max_epochs=10), table=table)
print("fold accuracies", [round(a, 2) for a in cv.fold_accuracies], "mean", round(cv.mean_accuracy, 3))
