import pytest

from exprensemble import io
from exprensemble.cli import main


@pytest.fixture(scope="module")
def gen_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "data"
    assert main(["gen", "--out", str(d), "--seed", "3", "--videos", "12", "--eval-videos", "3"]) == 0
    return d


def test_gen_outputs(gen_dir):
    assert sorted(p.name for p in gen_dir.iterdir()) == ["dataset.csv", "eval.csv", "source0.csv", "source1.csv", "source2.csv"]


def test_split_train_predict(gen_dir, tmp_path):
    plan = tmp_path / "plan.csv"
    assert main(["split", "--dataset", str(gen_dir / "dataset.csv"), "--out", str(plan)]) == 0
    model = tmp_path / "m.txt"
    assert main(["train", "--dataset", str(gen_dir / "dataset.csv"), "--plan", str(plan), "--fold", "2",
                 "--columns", "0:4", "--epochs", "3", "--out", str(model)]) == 0
    assert io.read_model(model).columns == (0, 1, 2, 3)
    preds = tmp_path / "p.csv"
    assert main(["predict", "--model", str(model), "--dataset", str(gen_dir / "dataset.csv"),
                 "--plan", str(plan), "--fold", "2", "--out", str(preds)]) == 0
    p = io.read_predictions(preds)
    fp = io.read_fold_plan(plan)
    assert {fp.fold_of(v) for v in p.video_ids} == {1}


def test_fuse_search_eval(gen_dir, tmp_path, capsys):
    srcs = [str(gen_dir / f"source{m}.csv") for m in range(3)]
    # restrict to the eval frames so labels come from eval.csv
    ev = io.read_dataset(gen_dir / "eval.csv")
    cut = []
    for s in srcs:
        path = tmp_path / ("e_" + s.rsplit("/", 1)[1])
        io.write_predictions(io.read_predictions(s).subset(ev.frame_ids), path)
        cut.append(str(path))
    rec = tmp_path / "w.txt"
    assert main(["search", *cut, "--dataset", str(gen_dir / "eval.csv"), "--grid", "0:1:0.5", "--out", str(rec)]) == 0
    weights, ids, _ = io.read_weights_record(rec)
    assert ids == ["e_source0", "e_source1", "e_source2"]
    fused = tmp_path / "f.csv"
    sub = tmp_path / "s.csv"
    assert main(["fuse", *cut, "--weights", weights.ratio(), "--out", str(fused), "--submission", str(sub)]) == 0
    assert len(io.read_submission(sub)) == len(ev)
    assert main(["fuse", *cut, "--preset", "Fusion 2 / Fold 1", "--out", str(tmp_path / "g.csv")]) == 0
    assert main(["fuse", *cut, "--across", "--out", str(tmp_path / "h.csv")]) == 0
    capsys.readouterr()
    assert main(["eval", "--predictions", str(fused), "--dataset", str(gen_dir / "eval.csv"), "--out", str(tmp_path / "r.txt")]) == 0
    assert "macro_f1=" in capsys.readouterr().out


def test_missing_file_is_io_error(tmp_path, capsys):
    assert main(["eval", "--predictions", str(tmp_path / "no.csv"), "--dataset", str(tmp_path / "no2.csv")]) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_file_is_validation_error(gen_dir, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(",".join(io.PREDICTION_HEADER) + "\nf,v," + ",".join(["0.5"] * 8) + "\n")
    assert main(["eval", "--predictions", str(bad), "--dataset", str(gen_dir / "eval.csv")]) == 1


def test_bad_weights_is_validation_error(gen_dir, tmp_path):
    s = str(gen_dir / "source0.csv")
    assert main(["fuse", s, str(gen_dir / "source1.csv"), "--weights", "1:x", "--out", str(tmp_path / "o.csv")]) == 1
    assert main(["fuse", s, "--weights", "1:1", "--out", str(tmp_path / "o.csv")]) == 1


def test_pipeline_command(gen_dir, tmp_path, capsys):
    out = tmp_path / "run"
    preds = [str(gen_dir / f"source{m}.csv") for m in range(3)]
    code = main(["pipeline", "--out", str(out), "--dataset", str(gen_dir / "dataset.csv"),
                 "--eval-dataset", str(gen_dir / "eval.csv"), "--predictions", *preds, "--grid", "0:1:0.5"])
    assert code == 0
    assert "cross-fold fused macro_f1=" in capsys.readouterr().out
    assert (out / "submission.csv").exists()


def test_pipeline_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["pipeline", "--config", str(cfg)]) == 1
