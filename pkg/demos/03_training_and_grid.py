"""
Training and a small grid
=========================

Adagrad with early stopping on a synthetic task, then a grid over
architectures and depths rendered as a results table.
"""

from implicit_disco import ModelConfig, TrainConfig, train, grid_search
from implicit_disco.training import render_table
from implicit_disco.synthetic import order_task, toy_vectors

table = toy_vectors(k=10)

# label = whether MARK comes before ANTI in the first argument
train_set, dev_set = order_task(300, seed=1), order_task(100, seed=2)

cfg = ModelConfig("LSTM", "last", k=10, hidden_dim=10, num_labels=2)
model, history = train(train_set, dev_set, cfg, TrainConfig(learning_rate=0.05, max_epochs=20, seed=0), table)
print("dev accuracy by epoch:", [round(a, 2) for a in history.dev_accuracy])
print("best epoch", history.best_epoch)

configs = [ModelConfig(a, "sum", k=10, hidden_dim=10, num_hidden_layers=t, num_labels=2)
           for a in ("FF", "LSTM") for t in (0, 1)]
records, best = grid_search(train_set, dev_set, configs, TrainConfig(max_epochs=8, patience=2), table, rates=[0.05])
print(render_table(records, metric="dev"))
print("best:", best.config.architecture, best.config.num_hidden_layers, "hidden layers")
