import numpy as np
import pytest

from implicit_disco import numcore as nc
from implicit_disco.corpus import RelationInstance, right_branching
from implicit_disco.embeddings import WordVectorTable
from implicit_disco.models import Model, ModelConfig
from implicit_disco.training import init_params

VOCAB = [f"t{i}" for i in range(8)]


def random_table(rng, k, vocab=VOCAB):
    return WordVectorTable(list(vocab), rng.normal(size=(len(vocab), k)))


def random_instance(rng, max_len=4, min_len=1, vocab=VOCAB, random_trees=False):
    n1 = int(rng.integers(min_len, max_len + 1))
    n2 = int(rng.integers(min_len, max_len + 1))
    a1 = [str(t) for t in rng.choice(vocab, size=n1)]
    a2 = [str(t) for t in rng.choice(vocab, size=n2)]
    build = random_tree if random_trees else (lambda toks, _rng: right_branching(toks))
    return RelationInstance(tuple(a1), tuple(a2), ("a",), arg1_tree=build(a1, rng), arg2_tree=build(a2, rng), id="x")


def random_tree(tokens, rng):
    from implicit_disco.corpus import Leaf, Node

    if len(tokens) == 1:
        return Leaf(tokens[0])
    cut = int(rng.integers(1, len(tokens)))
    return Node(random_tree(tokens[:cut], rng), random_tree(tokens[cut:], rng))


def random_model(config: ModelConfig, seed: int, bias_scale: float = 0.3) -> Model:
    """Initialized model with non-zero biases so every path carries signal."""
    rng = np.random.default_rng(seed + 10_000)
    params = init_params(config, seed)
    for p in params.values():
        p.data += rng.normal(scale=bias_scale, size=p.shape)
    return Model(config, params, [f"L{i}" for i in range(config.num_labels)])


def gradient_error(model, inst, table, gold):
    params = model.parameters()
    with nc.Tape() as tape:
        loss = nc.softmax_cross_entropy(model.logits(inst, table), gold)
    analytic = tape.backward(loss, params)

    def f():
        return float(nc.softmax_cross_entropy(model.logits(inst, table), gold).data)

    numeric = nc.finite_difference_gradients(f, params, eps=1e-4)
    return nc.max_relative_error(analytic, numeric)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------- acceptance summary

_CRITERIA = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    cid, text = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        detail = ""
        if report.outcome == "skipped" and isinstance(report.longrepr, tuple):
            detail = f" ({report.longrepr[2].removeprefix('Skipped: ')})"
        _CRITERIA[cid] = f"{outcome}  criterion {cid}: {text}{detail}"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[cid])
