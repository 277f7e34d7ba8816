import math
import warnings

import numpy as np
import pytest

from numpy.testing import assert_allclose

from pyscaling.autograd import Tape
from pyscaling.config import ModelConfig, TrainingConfig
from pyscaling.exception import CorpusError, SequenceError, VocabularyCapWarning, VocabularyError
from pyscaling.model import ROLES
from pyscaling.tensor import FlopLedger, Matrix, matmul
from pyscaling.training import UNKNOWN_SYMBOL, CharVocabulary, GradientSet, backward, cross_entropy, \
    forward_loss, grad_check, load_corpus, loss_all_positions, relative_error, sgd_step, train_demo

TINY = ModelConfig(n=16, vocab=64, d_emb=16, heads=2, layers=1)


def test_uniform_logits_give_log_vocab():
    tokens = [0, 3, 5, 1]
    assert loss_all_positions(Matrix.zeros(4, 11), tokens) == pytest.approx(math.log(11), rel=1e-12)


def test_loss_matches_per_position_oracle():
    rng = np.random.default_rng(12)
    logits = rng.normal(size=(4, 6))
    tokens = [int(t) for t in rng.integers(0, 6, size=4)]
    expected = 0.0
    for k in range(3):
        row = logits[k]
        expected -= row[tokens[k + 1]] - math.log(np.exp(row).sum())
    assert loss_all_positions(Matrix(logits), tokens) == pytest.approx(expected / 3, rel=1e-12)


def test_loss_needs_two_positions():
    with pytest.raises(SequenceError):
        loss_all_positions(Matrix.zeros(1, 11), [3])


def test_loss_ignores_last_row():
    logits = np.zeros((3, 5))
    logits[0, 2] = 4.0
    changed = logits.copy()
    changed[2] = [9.0, -9.0, 3.0, 0.0, 1.0]
    assert loss_all_positions(Matrix(logits), [1, 2, 0]) == loss_all_positions(Matrix(changed), [1, 2, 0])


def test_perfect_predictions_give_zero_logit_gradients():
    tokens = [0, 3, 1, 2]
    h = np.zeros((4, 4))
    for k, target in enumerate(tokens[1:]):
        h[k, target] = 1000.0
    hidden = Matrix(h)
    unembedding = Matrix.identity(4)

    tape = Tape()
    logits = matmul(hidden, unembedding, None, tape=tape)
    loss = cross_entropy(logits, tokens, tape)
    tape.backward(loss, None)
    assert loss.data[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(tape.grad(unembedding) == 0.0)


def test_linear_toy_gradient_matches_finite_difference():
    x = np.array([[0.3, -1.2, 2.0]])
    w = np.array([[0.5], [0.25], [-1.0]])
    tape = Tape()
    weights = Matrix(w)
    out = matmul(Matrix(x), weights, None, tape=tape)
    tape.backward(out, None)
    analytic = tape.grad(weights)

    epsilon = 1e-5
    for i in range(3):
        plus, minus = w.copy(), w.copy()
        plus[i, 0] += epsilon
        minus[i, 0] -= epsilon
        numeric = ((x @ plus) - (x @ minus))[0, 0] / (2 * epsilon)
        assert relative_error(analytic[i, 0], numeric) <= 1e-9


def test_backward_is_twice_forward(small_params):
    ledger = FlopLedger()
    graph = forward_loss([1, 5, 2, 8], small_params, ledger)
    forward_matmul = ledger.matmul_total(FlopLedger.FORWARD)
    grads = backward(graph, ledger)
    assert forward_matmul == 7008
    assert ledger.matmul_total(FlopLedger.BACKWARD) == 2 * 7008
    assert ledger.total() == 3 * 7008 + 2 * 128
    assert set(grads) == set(small_params.names())
    for name, matrix in small_params.named():
        assert grads[name].shape == matrix.shape


def test_sgd_step(small_params):
    zeros = GradientSet(small_params, {name: np.zeros(m.shape) for name, m in small_params.named()})
    assert sgd_step(small_params, zeros, 0.5).equals(small_params)

    grads = backward(forward_loss([1, 2, 3, 4], small_params, FlopLedger()), FlopLedger())
    assert sgd_step(small_params, grads, 0.0).equals(small_params)
    stepped = sgd_step(small_params, grads, 0.1)
    assert_allclose(stepped["U"].data, small_params["U"].data - 0.1 * grads["U"].data)


def test_sgd_step_lowers_loss(small_params):
    tokens = [1, 2, 3, 4]
    graph = forward_loss(tokens, small_params, FlopLedger())
    grads = backward(graph, FlopLedger())
    after = forward_loss(tokens, sgd_step(small_params, grads, 0.05), FlopLedger())
    assert after.loss.data[0, 0] < graph.loss.data[0, 0]


def test_grad_check_covers_every_role(check_cfg):
    report = grad_check(check_cfg, seed=0, epsilon=1e-5)
    assert report.checked >= 200
    assert set(report.role_errors) == set(ROLES)
    assert report.max_relative_error <= 1e-5
    assert report.max_unfloored_error >= report.max_relative_error


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(0.0, 0.0, 0.0) == 0.0
    assert relative_error(1e-6, 2e-6) == pytest.approx(1e-3)
    assert relative_error(1e-6, 2e-6, 0.0) == pytest.approx(0.5)
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)


def test_vocabulary_from_text():
    vocabulary = CharVocabulary.from_text("banana bread", 32)
    assert vocabulary.get_symbols() == (" ", "a", "b", "d", "e", "n", "r")
    assert len(vocabulary) == 7
    assert vocabulary.decode(vocabulary.encode("bread")) == "bread"
    with pytest.raises(VocabularyError):
        vocabulary.encode("z")


def test_vocabulary_cap_keeps_most_frequent():
    with pytest.warns(VocabularyCapWarning):
        vocabulary = CharVocabulary.from_text("aaabbc", 2)
    assert vocabulary.get_symbols() == ("a", )
    assert vocabulary.has_unknown()
    assert len(vocabulary) == 2
    assert list(vocabulary.encode("abc")) == [0, 1, 1]
    assert vocabulary.decode([0, 1]) == "a" + UNKNOWN_SYMBOL


def test_corpus_errors(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "missing.txt")
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    with pytest.raises(CorpusError):
        load_corpus(empty)


def test_bundled_corpus():
    text = load_corpus()
    assert 8000 <= len(text) <= 12000


def test_train_demo_is_deterministic():
    tcfg = TrainingConfig(steps=3, batch_size=2, seed=4)
    first = train_demo(TINY, tcfg)
    second = train_demo(TINY, tcfg)
    assert first.losses == second.losses
    assert first.params.equals(second.params)
    assert first.ledger.total() == second.ledger.total()
    assert first.ledger.matmul_total(FlopLedger.BACKWARD) == 2 * first.ledger.matmul_total(FlopLedger.FORWARD)


def test_train_demo_initial_loss_near_log_vocabulary():
    result = train_demo(TINY, TrainingConfig(steps=1, seed=1))
    log_v = math.log(len(result.vocabulary))
    assert abs(result.losses[0] - log_v) <= 0.1 * log_v
    assert result.params.get_config().vocab == len(result.vocabulary)


def test_train_demo_short_corpus_wraps(tmp_path):
    corpus = tmp_path / "short.txt"
    corpus.write_text("abcab")
    result = train_demo(TINY, TrainingConfig(steps=2, batch_size=1, corpus=str(corpus)))
    assert len(result.losses) == 2


def test_train_demo_converges():
    from pyscaling.training import DEMO_CONFIG

    with warnings.catch_warnings():
        warnings.simplefilter("error", VocabularyCapWarning)
        result = train_demo(DEMO_CONFIG, TrainingConfig())
    assert len(result.losses) == 200
    assert all(math.isfinite(loss) for loss in result.losses)
    assert result.losses[-1] < 0.8 * result.losses[0]
