import json

import numpy as np
import pytest

from accel2pos import cli
from accel2pos import evaluation as ev
from accel2pos.dsp_recon import DspPipelineConfig, save_config
from accel2pos.metrics import ErrorMetrics
from accel2pos.seq2seq import FormulationConfig
from accel2pos.synthgen import GeneratorConfig, SensorModel, build_scenario, write_dataset
from accel2pos.timeseries import SampledSignal, read_csv, write_csv

XYZ = ("x", "y", "z")
SMALL = GeneratorConfig(sensor=SensorModel(raw_rate_hz=1000.0))


def sig(data, fs=100.0):
    return SampledSignal(XYZ, np.asarray(data, float), fs)


@pytest.fixture(scope="module")
def tiny_ds():
    return build_scenario(1, n_train_series=2, n_test_series=1, seqs_per_series=2, seed=0,
                          config=SMALL)


def fake_metrics():
    truth = sig(np.zeros((3, 3)))
    out = {}
    for method, off in (("double_integration", 5.0), ("autoregressive", 1.0)):
        for k in (1, 2):
            em = ErrorMetrics()
            for j in range(3):
                em.add(9, j, sig(np.full((3, 3), off * k + j)), truth)
            out[(method, k)] = em
    return out


def test_report_row_count_and_order():
    rep = ev.ComparisonReport.from_metrics(fake_metrics())
    assert len(rep.rows) == 2 * 2 * 2
    assert rep.methods == ["double_integration", "autoregressive"]
    assert rep.scenarios == [1, 2]
    assert rep.rows[0].method == "double_integration" and rep.rows[0].metric == "MAE"


def test_report_csv_columns_and_table():
    rep = ev.ComparisonReport.from_metrics(fake_metrics())
    lines = rep.to_csv().splitlines()
    assert lines[0] == "method,scenario,metric,mean_mm,std_mm"
    assert len(lines) == 1 + len(rep.rows)
    table = rep.to_table()
    assert "Double Integration" in table and "Scen. 2" in table and "±" in table
    assert "N-1" in table.splitlines()[1]


def test_report_cell_values():
    rep = ev.ComparisonReport.from_metrics(fake_metrics())
    # per-sequence offsets k*off + j along all axes: error norm sqrt(3) * value
    vals = np.sqrt(3) * (5.0 + np.arange(3))
    r = rep.row("di", 1, "MAE")
    assert r.mean_mm == pytest.approx(vals.mean()) and r.std_mm == pytest.approx(vals.std(ddof=1))


def test_trajectory_export_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    truth, pred = sig(rng.normal(size=(20, 3))), sig(rng.normal(size=(20, 3)))
    path = tmp_path / "t.csv"
    ev.export_trajectory(pred, truth, path)
    assert path.read_text().splitlines()[0] == "t,x_true,y_true,z_true,x_pred,y_pred,z_pred"
    p2, t2 = ev.read_trajectory(path)
    assert np.array_equal(p2.data, pred.data) and np.array_equal(t2.data, truth.data)


def test_parse_method():
    assert ev.parse_method("ar") == "autoregressive"
    with pytest.raises(ValueError):
        ev.parse_method("kalman")


def test_di_only_report_structure(tiny_ds, tmp_path):
    write_dataset(tiny_ds, tmp_path / "data")
    save_config(DspPipelineConfig.from_generator(SMALL), tmp_path / "dsp.json")
    rep = ev.compare(tmp_path / "data", ["di"], dsp_config=tmp_path / "dsp.json", out=tmp_path / "out")
    assert rep.methods == ["double_integration"] and rep.scenarios == [1]
    assert len(rep.rows) == 2
    assert len(rep.per_sequence[("double_integration", 1)].per_sequence) == len(tiny_ds.test)
    for name in ("report.csv", "report.txt", "per_sequence.csv"):
        assert (tmp_path / "out" / name).is_file()
    trajs = list((tmp_path / "out" / "trajectories").rglob("*.csv"))
    assert len(trajs) == len(tiny_ds.test)


def test_missing_checkpoint_is_configuration_error(tiny_ds, tmp_path):
    write_dataset(tiny_ds, tmp_path / "data")
    (tmp_path / "ckpt").mkdir()
    with pytest.raises(ev.ConfigurationError, match="missing checkpoint"):
        ev.compare(tmp_path / "data", ["ar"], checkpoints=tmp_path / "ckpt", out=tmp_path / "o")
    with pytest.raises(ev.ConfigurationError):
        ev.compare(tmp_path / "data", ["di"], dsp_config=tmp_path / "nope", out=tmp_path / "o")


def test_regeneration_from_cached_trajectories_is_bit_identical(tiny_ds, tmp_path):
    models = {(1, "many_to_many"): {ax: ev.train_models(tiny_ds, FormulationConfig(epochs=1, hidden_size=4))[ax][:2]
                                    for ax in XYZ}}
    dsp = {1: DspPipelineConfig.from_generator(SMALL)}
    rep = ev.evaluate([tiny_ds], ["di", "m2m"], models, dsp, out=tmp_path)
    again = ev.report_from_trajectories(tmp_path)
    assert again.to_csv() == rep.to_csv()
    assert again.per_sequence_csv() == rep.per_sequence_csv()


def test_parallel_axis_training_matches_serial(tiny_ds):
    base = FormulationConfig(kind="m2m", epochs=2, hidden_size=4)
    serial = ev.train_models(tiny_ds, base, workers=1)
    parallel = ev.train_models(tiny_ds, base, workers=3)
    for ax in XYZ:
        for name, p in serial[ax][0].params().items():
            assert np.array_equal(p, parallel[ax][0].params()[name])


# --------------------------------------------------------------------------
# CLI


def write_generator(tmp_path):
    path = tmp_path / "gen.json"
    path.write_text(json.dumps(SMALL.to_dict()))
    return path


def small_synth(tmp_path, out):
    return cli.main(["synth", "--scenario", "1", "--seed", "3", "--out", str(out),
                     "--generator", str(write_generator(tmp_path)), "--train-series", "2",
                     "--test-series", "1", "--seqs-per-series", "2"])


def test_cli_end_to_end(tmp_path, capsys):
    data, ck, out = tmp_path / "data", tmp_path / "ck", tmp_path / "out"
    assert small_synth(tmp_path, data) == 0
    assert cli.main(["dsp-optimize", "--dataset", str(data), "--scenario", "1", "--budget", "4",
                     "--out", str(ck / "s1_dsp.json")]) == 0
    for ax in XYZ:
        assert cli.main(["train", "--scenario", "1", "--formulation", "ar", "--axis", ax,
                         "--dataset", str(data), "--epochs", "2", "--out", str(ck) + "/"]) == 0
    assert cli.main(["compare", "--dataset", str(data), "--methods", "di,ar", "--checkpoints",
                     str(ck), "--dsp-config", str(ck), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "Autoregressive" in text and "Double Integration" in text
    assert (out / "report.csv").read_text().count("\n") == 1 + 2 * 2

    seq = data / "scenario1" / "test" / "series2" / "seq0"
    p0 = ",".join(str(v) for v in json.loads((seq / "meta.json").read_text())["p0_mm"])
    ckpts = [str(ev.checkpoint_path(ck, 1, "ar", ax)) for ax in XYZ]
    assert cli.main(["predict", "--checkpoint", *ckpts, "--input", str(seq / "accel_raw.csv"),
                     "--p0", p0, "--out", str(tmp_path / "pred.csv")]) == 0
    pred = read_csv(tmp_path / "pred.csv")
    assert pred.channels == XYZ and pred.sample_rate_hz == 100.0
    assert cli.main(["dsp-recon", "--config", str(ck / "s1_dsp.json"), "--input",
                     str(seq / "accel_raw.csv"), "--p0", p0, "--out", str(tmp_path / "di.csv")]) == 0
    capsys.readouterr()
    assert cli.main(["evaluate", "--pred", str(tmp_path / "di.csv"), "--truth",
                     str(seq / "position.csv")]) == 0
    assert "RMSE" in capsys.readouterr().out


def test_cli_evaluate_prints_metrics(tmp_path, capsys):
    write_csv(sig([[3.0, 4.0, 0.0], [0.0, 0.0, 0.0]]), tmp_path / "p.csv")
    write_csv(sig(np.zeros((2, 3))), tmp_path / "t.csv")
    cli.main(["evaluate", "--pred", str(tmp_path / "p.csv"), "--truth", str(tmp_path / "t.csv")])
    out = capsys.readouterr().out
    assert "MAE 2.5000 mm" in out and "RMSE 3.5355 mm" in out


def test_cli_missing_checkpoint_exit_code(tmp_path, capsys):
    small_synth(tmp_path, tmp_path / "data")
    code = cli.main(["compare", "--dataset", str(tmp_path / "data"), "--methods", "m2m",
                     "--checkpoints", str(tmp_path), "--out", str(tmp_path / "o")])
    assert code == 2 and "missing checkpoint" in capsys.readouterr().err


def test_cli_tune_writes_config(tmp_path, capsys):
    small_synth(tmp_path, tmp_path / "data")
    assert cli.main(["tune", "--scenario", "1", "--formulation", "m2m", "--budget", "2",
                     "--dataset", str(tmp_path / "data"), "--epochs", "1",
                     "--out", str(tmp_path / "best.json")]) == 0
    cfg = FormulationConfig.from_dict(json.loads((tmp_path / "best.json").read_text()))
    assert cfg.kind.value == "many_to_many"
