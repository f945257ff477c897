import datetime as dt
import json
import math

import pytest

import predfilter as pf

T0 = 1577836800  # 2020-01-01T00:00:00Z


def hourly(values, source_id="S"):
    return pf.make_frame([T0 + 3600 * i for i in range(len(values))], values, 3600, source_id)


def test_reduction_and_mae():
    assert round(pf.data_reduction(52535, 6810), 2) == 87.04
    assert pf.mae([1, 2, 3], [1, 1, 4]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        pf.data_reduction(0, 0)


def test_constant_series_transmits_once():
    r = pf.run_session(hourly([4.5] * 100), None, epsilon=0.5, k=24)
    assert r["total"] == 100
    assert r["transmitted"] == 1
    assert r["decisions"][0] == "transmit"
    assert r["log_csv"].startswith("index,timestamp,actual,predicted,abs_error,decision\n")


def test_synchronized_bound_with_random_weights():
    values = [10 + 3 * math.sin(i / 5) for i in range(300)]
    w = pf.random_weights(hidden=6, window=8, seed=3, mean=10.0, std=3.0)
    r = pf.run_session(hourly(values), w, epsilon=0.4, k=8)
    assert max(abs(a - b) for a, b in zip(r["reconstructed"], values)) <= 0.4


def test_window_mismatch_is_value_error():
    w = pf.random_weights(hidden=4, window=6, seed=1)
    with pytest.raises(pf.InputError, match="k=24"):
        pf.run_session(hourly([1.0, 2.0, 3.0]), w, epsilon=0.5, k=24)


def test_train_and_roundtrip(tmp_path):
    values = [15 + 5 * math.sin(2 * math.pi * i / 24) for i in range(400)]
    cfg = json.dumps({"hidden": 8, "max_epochs": 3, "lr": 0.01})
    w, report = pf.train_model(hourly(values), window=12, config_json=cfg, seed=5)
    assert w.window == 12 and w.hidden == 8
    assert json.loads(report)["best_epoch"] >= 1
    path = tmp_path / "w.json"
    w.save(str(path))
    loaded = pf.ModelWeights.load(str(path))
    assert loaded == w
    assert loaded.predict(values[:12]) == w.predict(values[:12])


def test_resample_and_csv(tmp_path):
    path = tmp_path / "ten.csv"
    start = dt.datetime(2020, 1, 1, tzinfo=dt.timezone.utc)
    rows = ["time,temp"] + [
        f"{(start + dt.timedelta(minutes=10 * i)).strftime('%Y-%m-%dT%H:%M:%SZ')},{i % 6}"
        for i in range(12)
    ]
    path.write_text("\n".join(rows) + "\n")
    frame, report = pf.parse_csv(str(path), "time", "temp")
    assert report["accepted"] == 12
    hourly_frame = pf.resample(frame, 3600)
    assert len(hourly_frame) == 2
    assert hourly_frame.values == [2.5, 2.5]
