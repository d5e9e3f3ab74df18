import re
import struct

import numpy as np
import pytest

from pcnet import cli
from pcnet import dataset as ds
from pcnet.checkpoint import FORMAT_VERSION, load_checkpoint
from pcnet.metrics import METRIC_KEYS

TINY_CFG = """\
model = pointnet
seed = 0
points = 24
samples_per_class = 3
synth_points_min = 16
synth_points_max = 40
epochs = 40
batch_size = 4
learning_rate = 0.003
tnet_mlp = 4
pointnet_mlp = 8, 16
pointnet_head = 8
sa_centers = 8, 4
sa_radius = 0.4, 0.8
sa_max_neighbors = 8, 8
sa_k = 8, 8
sa_mlp = 8; 16
pnpp_head = 8
"""


def corner_files(dir_, per_class=4, n_points=24, seed=5):
    """Labeled blob files far enough apart that a tiny model overfits fast."""
    rng = np.random.default_rng(seed)
    corners = np.array([[1, 1, 1], [-1, -1, 1], [1, -1, -1], [-1, 1, -1]], dtype=float)
    names = []
    for c in range(4):
        for i in range(per_class):
            pts = corners[c] + rng.normal(scale=0.15, size=(n_points, 3))
            name = f"{ds.CLASS_NAMES[c]}_{i:02d}.xyz"
            ds.save_cloud(pts, dir_ / name, c)
            names.append(name)
    ds.write_manifest(names, dir_ / "manifest.txt")
    return names


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    data.mkdir()
    corner_files(data)
    cfg = root / "run.cfg"
    cfg.write_text(TINY_CFG)
    return root, data, cfg


@pytest.fixture(scope="module")
def trained(workdir):
    root, data, cfg = workdir
    ckpt = root / "model.ckpt"
    code = cli.main(["train", str(data / "manifest.txt"),
                     "--config", str(cfg), "--out", str(ckpt)])
    assert code == 0
    return root, data, cfg, ckpt


def test_synth_counts_and_loadability(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("samples_per_class = 10\nsynth_points_min = 16\nsynth_points_max = 40\n")
    out = tmp_path / "set"
    assert cli.main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
    names = ds.read_manifest(out / "manifest.txt")
    assert len(names) == 40
    label_counts = dict.fromkeys(range(4), 0)
    for name in names:
        pts, label = ds.read_cloud_file(out / name)
        assert pts.shape[1] == 3 and 16 <= len(pts) <= 40
        label_counts[label] += 1
    assert label_counts == {0: 10, 1: 10, 2: 10, 3: 10}


def test_synth_deterministic(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("samples_per_class = 2\nsynth_points_min = 16\nsynth_points_max = 24\n")
    dirs = tmp_path / "a", tmp_path / "b"
    for d in dirs:
        assert cli.main(["synth", "--config", str(cfg), "--out", str(d)]) == 0
    names = ds.read_manifest(dirs[0] / "manifest.txt")
    assert names == ds.read_manifest(dirs[1] / "manifest.txt")
    for name in names + ["manifest.txt"]:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_preprocess_fixes_sizes(tmp_path, capsys):
    raw = tmp_path / "raw"
    raw.mkdir()
    rng = np.random.default_rng(3)
    names = []
    for i, n in enumerate([5, 17, 24, 60]):
        name = f"cloud_{i}.xyz"
        ds.save_cloud(rng.normal(size=(n, 3)), raw / name, i % 4)
        names.append(name)
    ds.write_manifest(names, raw / "manifest.txt")
    out = tmp_path / "proc"
    code = cli.main(["preprocess", str(raw / "manifest.txt"),
                     "--points", "24", "--out", str(out)])
    stdout = capsys.readouterr().out
    assert code == 0
    assert "class balance" in stdout
    assert ds.read_manifest(out / "manifest.txt") == names
    for name in names:
        pts, _ = ds.read_cloud_file(out / name)
        assert len(pts) == 24
        assert np.linalg.norm(pts, axis=1).max() <= 1.0 + 1e-3

    # fixed point: a second pass keeps every cloud at the target size
    again = tmp_path / "proc2"
    assert cli.main(["preprocess", str(out / "manifest.txt"),
                     "--points", "24", "--out", str(again)]) == 0
    for name in names:
        pts, _ = ds.read_cloud_file(again / name)
        assert len(pts) == 24


def test_preprocess_skips_corrupt_file(tmp_path, capsys):
    raw = tmp_path / "raw"
    raw.mkdir()
    rng = np.random.default_rng(4)
    names = []
    for i in range(10):
        name = f"c_{i}.xyz"
        ds.save_cloud(rng.normal(size=(12, 3)), raw / name, i % 4)
        names.append(name)
    (raw / "c_7.xyz").write_text("0.0 0.0\nnot a point\n")
    ds.write_manifest(names, raw / "manifest.txt")
    out = tmp_path / "proc"
    code = cli.main(["preprocess", str(raw / "manifest.txt"),
                     "--points", "16", "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    warnings = [l for l in captured.err.splitlines() if l]
    assert len(warnings) == 1
    assert warnings[0].startswith("warning: skipping c_7.xyz")
    assert "1 skipped" in captured.out
    kept = ds.read_manifest(out / "manifest.txt")
    assert len(kept) == 9 and "c_7.xyz" not in kept


def test_preprocess_all_skipped_fails(tmp_path, capsys):
    raw = tmp_path / "raw"
    raw.mkdir()
    (raw / "bad.xyz").write_text("garbage\n")
    ds.write_manifest(["bad.xyz", "missing.xyz"], raw / "manifest.txt")
    code = cli.main(["preprocess", str(raw / "manifest.txt"),
                     "--out", str(tmp_path / "proc")])
    captured = capsys.readouterr()
    assert code == 1
    errors = [l for l in captured.err.splitlines() if l.startswith("error:")]
    assert errors == ["error: all 2 input files were skipped"]


def test_train_writes_history_and_checkpoint(trained):
    root, data, cfg, ckpt = trained
    history = (root / "model.ckpt.history").read_text().splitlines()
    assert len(history) == 40
    for epoch, line in enumerate(history, start=1):
        assert re.fullmatch(rf"{epoch},\d+\.\d{{6}},[01]\.\d{{6}}", line)
    kind, _, loaded_cfg = load_checkpoint(ckpt)
    assert kind == "pointnet"
    assert loaded_cfg.points == 24


def test_train_single_epoch_single_line(workdir, tmp_path):
    root, data, cfg = workdir
    short = tmp_path / "short.cfg"
    short.write_text(TINY_CFG.replace("epochs = 40", "epochs = 1"))
    ckpt = tmp_path / "one.ckpt"
    assert cli.main(["train", str(data / "manifest.txt"),
                     "--config", str(short), "--out", str(ckpt)]) == 0
    lines = (tmp_path / "one.ckpt.history").read_text().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("1,")


def test_train_deterministic(workdir, tmp_path):
    root, data, cfg = workdir
    short = tmp_path / "short.cfg"
    short.write_text(TINY_CFG.replace("epochs = 40", "epochs = 2"))
    paths = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    for p in paths:
        assert cli.main(["train", str(data / "manifest.txt"),
                         "--config", str(short), "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert (tmp_path / "a.ckpt.history").read_bytes() == (tmp_path / "b.ckpt.history").read_bytes()


def test_train_pointnetpp_kind_recorded(workdir, tmp_path):
    root, data, cfg = workdir
    short = tmp_path / "short.cfg"
    short.write_text(TINY_CFG.replace("epochs = 40", "epochs = 2"))
    ckpt = tmp_path / "pp.ckpt"
    assert cli.main(["train", str(data / "manifest.txt"), "--config", str(short),
                     "--model", "pointnetpp", "--out", str(ckpt)]) == 0
    kind, _, loaded_cfg = load_checkpoint(ckpt)
    assert kind == "pointnetpp"
    assert loaded_cfg.model == "pointnetpp"


def test_eval_report_keys_and_overfit_accuracy(trained, tmp_path, capsys):
    root, data, cfg, ckpt = trained
    report = tmp_path / "report.txt"
    code = cli.main(["eval", str(ckpt), str(data / "manifest.txt"),
                     "--out", str(report)])
    stdout = capsys.readouterr().out
    assert code == 0
    assert report.read_text() == stdout
    lines = stdout.splitlines()
    for key in METRIC_KEYS:
        assert any(l.startswith(f"{key}=") for l in lines)
    at = lines.index("confusion=")
    rows = lines[at + 1:at + 5]
    assert all(re.fullmatch(r"\d+ \d+ \d+ \d+", r) for r in rows)
    # train split of an overfit run
    assert "accuracy=1.000000" in lines


def test_eval_deterministic(trained, tmp_path, capsys):
    root, data, cfg, ckpt = trained
    outs = []
    for name in ("r1.txt", "r2.txt"):
        assert cli.main(["eval", str(ckpt), str(data / "manifest.txt"),
                         "--out", str(tmp_path / name)]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
    assert (tmp_path / "r1.txt").read_bytes() == (tmp_path / "r2.txt").read_bytes()


def test_eval_version_mismatch_reports_both(trained, tmp_path, capsys):
    root, data, cfg, ckpt = trained
    blob = bytearray(ckpt.read_bytes())
    blob[4:8] = struct.pack("<I", FORMAT_VERSION + 3)
    stale = tmp_path / "stale.ckpt"
    stale.write_bytes(bytes(blob))
    code = cli.main(["eval", str(stale), str(data / "manifest.txt")])
    err = capsys.readouterr().err
    assert code == 1
    assert err.startswith("error:")
    assert str(FORMAT_VERSION + 3) in err and f"version {FORMAT_VERSION}" in err


def _predict_line(capsys, ckpt, cloud):
    assert cli.main(["predict", str(ckpt), str(cloud)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1
    return out[0]


def test_predict_probabilities(trained, capsys):
    root, data, cfg, ckpt = trained
    line = _predict_line(capsys, ckpt, data / f"{ds.CLASS_NAMES[0]}_00.xyz")
    name, *prob_text = line.split(" ")
    probs = [float(p) for p in prob_text]
    assert len(probs) == 4
    assert abs(sum(probs) - 1.0) < 1e-6
    assert name == ds.CLASS_NAMES[int(np.argmax(probs))]


def test_predict_permutation_invariant(trained, tmp_path, capsys):
    root, data, cfg, ckpt = trained
    src = data / f"{ds.CLASS_NAMES[2]}_01.xyz"
    lines = src.read_text().splitlines()
    header, body = lines[0], lines[1:]
    assert header.startswith("# label")
    rng = np.random.default_rng(11)
    shuffled = [body[i] for i in rng.permutation(len(body))]
    assert shuffled != body
    permuted = tmp_path / "permuted.xyz"
    permuted.write_text("\n".join([header] + shuffled) + "\n")
    assert _predict_line(capsys, ckpt, src) == _predict_line(capsys, ckpt, permuted)


def test_predict_rejects_cloud_below_model_minimum(workdir, tmp_path, capsys):
    root, data, cfg = workdir
    short = tmp_path / "short.cfg"
    short.write_text(TINY_CFG.replace("epochs = 40", "epochs = 1"))
    ckpt = tmp_path / "pp.ckpt"
    assert cli.main(["train", str(data / "manifest.txt"), "--config", str(short),
                     "--model", "pointnetpp", "--out", str(ckpt)]) == 0
    capsys.readouterr()
    code = cli.main(["predict", str(ckpt), str(data / f"{ds.CLASS_NAMES[0]}_00.xyz"),
                     "--points", "4"])
    err = capsys.readouterr().err
    assert code == 1
    # rejected either by config validation or by the predict-time size check
    assert err.startswith("error:")
    assert re.search(r"minimum|must be >= 8", err)


def test_missing_manifest_single_error_line(tmp_path, capsys):
    code = cli.main(["preprocess", str(tmp_path / "nope" / "manifest.txt")])
    err = capsys.readouterr().err
    assert code == 1
    assert len(err.splitlines()) == 1
    assert err.startswith("error:")


def test_eval_garbage_checkpoint(tmp_path, capsys):
    junk = tmp_path / "junk.ckpt"
    junk.write_bytes(b"\x00" * 32)
    manifest = tmp_path / "manifest.txt"
    ds.write_manifest([], manifest)
    code = cli.main(["eval", str(junk), str(manifest)])
    err = capsys.readouterr().err
    assert code == 1
    assert err.startswith("error:") and "not a checkpoint" in err


def test_bad_flag_exits_two(capsys):
    with pytest.raises(SystemExit) as exc_info:
        cli.main(["train", "m.txt", "--model", "transformer"])
    assert exc_info.value.code == 2
    assert capsys.readouterr().err.startswith("error:")
