import numpy as np
import pytest

from ssvep_bench.training import EarlyStopper, EpochRecord, TrainLog, minibatch_indices


def test_improvement_resets_counter():
    stop = EarlyStopper(patience=2)
    assert stop.update(1.0, 0)
    assert not stop.should_stop
    assert not stop.update(1.5, 1)
    assert not stop.should_stop
    assert stop.update(0.5, 2)
    assert stop.best_epoch == 2
    assert not stop.should_stop


def test_patience_zero_stops_immediately():
    stop = EarlyStopper(patience=0)
    stop.update(1.0, 0)
    assert stop.should_stop


def test_stops_after_patience_exhausted():
    stop = EarlyStopper(patience=3)
    stop.update(1.0, 0)
    for epoch in range(1, 3):
        stop.update(2.0, epoch)
        assert not stop.should_stop
    stop.update(2.0, 3)
    assert stop.should_stop
    assert stop.best_epoch == 0


def test_equal_loss_is_not_improvement():
    stop = EarlyStopper(patience=5)
    stop.update(1.0, 0)
    assert not stop.update(1.0, 1)


def test_negative_patience_rejected():
    with pytest.raises(ValueError):
        EarlyStopper(-1)


def test_minibatches_cover_every_index_once():
    rng = np.random.default_rng(0)
    batches = list(minibatch_indices(103, 16, rng))
    assert sorted(np.concatenate(batches)) == list(range(103))
    assert all(len(b) == 16 for b in batches[:-1])
    assert len(batches[-1]) == 103 - 16 * 6


def test_log_csv_layout(tmp_path):
    log = TrainLog()
    log.append(EpochRecord(0, 1.5, 1.25, 0.5))
    log.append(EpochRecord(1, 0.75, 0.5, 0.875))
    log.best_epoch = 1
    path = tmp_path / "log.csv"
    log.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss,val_acc"
    assert lines[1] == "0,1.5,1.25,0.5"
    assert lines[2] == "1,0.75,0.5,0.875"
    assert log.best_val_loss == 0.5
