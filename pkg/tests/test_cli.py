import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from lookout import cli, datasim, evalkit
from lookout.errors import InconsistentClipSets

SIM_ARGS = ["simulate", "--scenes", "1", "--steps", "100", "--duration", "8",
            "--seed", "0"]


def dataset(tmp_path, name="data", seed="0"):
    out = tmp_path / name
    args = SIM_ARGS[:-1] + [seed, "--out", str(out)]
    assert cli.main(args) == 0
    return out


def dir_hashes(root):
    out = {}
    for path in sorted(Path(root).rglob("*")):
        if path.is_file() and path.name != "run_manifest.json":
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


class TestSimulate:
    def test_manifest_and_files(self, tmp_path):
        out = dataset(tmp_path)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["sequences"] == ["seq00000/seq.json"]
        for name in ("poses.txt", "features.loft", "cloud.ply", "tracks.json"):
            assert (out / "seq00000" / name).exists()
        run = json.loads((out / "run_manifest.json").read_text())
        assert run["seed"] == 0
        assert Path(run["artifacts"]["manifest"]).exists()

    def test_same_seed_identical_hashes(self, tmp_path):
        a = dataset(tmp_path, "a")
        b = dataset(tmp_path, "b")
        assert dir_hashes(a) == dir_hashes(b)

    def test_different_seed_differs(self, tmp_path):
        a = dataset(tmp_path, "a", seed="0")
        b = dataset(tmp_path, "b", seed="1")
        assert dir_hashes(a) != dir_hashes(b)


class TestTrain:
    def test_artifacts_and_log(self, tmp_path):
        data = dataset(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["train", "--data", str(data), "--steps", "5",
                         "--out", str(out)]) == 0
        assert (out / "model.locp").exists()
        assert (out / "config.json").exists()
        log = (out / "train_log.csv").read_text().splitlines()
        assert log[0] == "step,lr,loss,loss_trans,loss_rot"
        assert len(log) == 6

    def test_missing_data_exit_2(self, tmp_path):
        assert cli.main(["train", "--data", str(tmp_path / "nope"),
                         "--out", str(tmp_path / "run")]) == 2

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_nonfinite_loss_exit_3(self, tmp_path):
        data = dataset(tmp_path)
        code = cli.main(["train", "--data", str(data), "--steps", "40",
                         "--lr", "1e18", "--out", str(tmp_path / "run")])
        assert code == 3


class TestEval:
    def test_report_rows_and_columns(self, tmp_path):
        data = dataset(tmp_path)
        run = tmp_path / "run"
        assert cli.main(["train", "--data", str(data), "--steps", "5",
                         "--out", str(run)]) == 0
        report = tmp_path / "rep" / "table"
        assert cli.main(["eval", "--data", str(data),
                         "--checkpoint", str(run / "model.locp"),
                         "--baselines", "const_vel,lin_ext,astar",
                         "--report", str(report)]) == 0
        lines = (tmp_path / "rep" / "table.csv").read_text().splitlines()
        assert lines[0].split(",") == evalkit.CSV_COLUMNS
        methods = [line.split(",")[0] for line in lines[1:]]
        assert methods == ["gt", "model", "const_vel", "lin_ext", "astar"]
        gt_row = lines[1].split(",")
        assert float(gt_row[1]) == 0.0 and float(gt_row[2]) == 0.0

    def test_rerun_byte_identical(self, tmp_path):
        data = dataset(tmp_path)
        for name in ("r1", "r2"):
            assert cli.main(["eval", "--data", str(data),
                             "--baselines", "const_vel",
                             "--report", str(tmp_path / name / "t")]) == 0
        assert (tmp_path / "r1" / "t.csv").read_bytes() == \
            (tmp_path / "r2" / "t.csv").read_bytes()

    def test_clip_set_mismatch_exit_4(self, tmp_path, monkeypatch):
        data = dataset(tmp_path)

        def boom(*a, **k):
            raise InconsistentClipSets("clip sets differ")

        monkeypatch.setattr(cli.evalkit, "make_report", boom)
        assert cli.main(["eval", "--data", str(data), "--baselines", "const_vel",
                         "--report", str(tmp_path / "r" / "t")]) == 4

    def test_goal_flag_requires_goal_checkpoint(self, tmp_path):
        data = dataset(tmp_path)
        run = tmp_path / "run"
        assert cli.main(["train", "--data", str(data), "--steps", "2",
                         "--out", str(run)]) == 0
        assert cli.main(["eval", "--data", str(data),
                         "--checkpoint", str(run / "model.locp"), "--goal",
                         "--report", str(tmp_path / "rep" / "t")]) == 2


class TestPlot:
    def test_svg_layers(self, tmp_path):
        data = dataset(tmp_path)
        out = tmp_path / "plot.svg"
        assert cli.main(["plot", "--sequence", str(data / "seq00000"),
                         "--out", str(out)]) == 0
        svg = out.read_text()
        assert svg.startswith("<svg")
        assert 'class="past"' in svg
        assert 'class="gt"' in svg
        assert 'class="pred"' not in svg  # no prediction file given
        assert "<rect" in svg

    def test_prediction_layer(self, tmp_path):
        data = dataset(tmp_path)
        seq = datasim.load_sequence(data / "seq00000" / "seq.json")
        from lookout import geom
        pred = geom.Trajectory.at_20hz(seq.trajectory.poses[:10])
        pred_path = tmp_path / "pred.txt"
        geom.save_trajectory(pred_path, pred)
        out = tmp_path / "plot.svg"
        assert cli.main(["plot", "--sequence", str(data / "seq00000"),
                         "--pred", str(pred_path), "--out", str(out)]) == 0
        assert 'class="pred"' in out.read_text()

    def test_heightmap_raster_matches_evalkit(self, tmp_path):
        data = dataset(tmp_path)
        out = tmp_path / "plot.svg"
        assert cli.main(["plot", "--sequence", str(data / "seq00000"),
                         "--out", str(out)]) == 0
        seq = datasim.load_sequence(data / "seq00000" / "seq.json")
        pts = seq.cloud_points
        spacing, pad = 0.3, 0.3
        from lookout import model
        grid = model.VoxelGridSpec(
            nz=max(int(np.ceil((pts[:, 2].max() - pts[:, 2].min() + 2 * pad) / spacing)), 2),
            ny=max(int(np.ceil((pts[:, 1].max() - pts[:, 1].min() + 2 * pad) / spacing)), 2),
            nx=max(int(np.ceil((pts[:, 0].max() - pts[:, 0].min() + 2 * pad) / spacing)), 2),
            spacing=spacing,
            origin=(float(pts[:, 0].min() - pad), float(pts[:, 1].min() - pad),
                    float(pts[:, 2].min() - pad)))
        hmap = evalkit.heightmap(evalkit.build_occupancy(pts, grid))
        grays = cli.heightmap_grays(hmap)
        svg = out.read_text()
        import re
        fills = [int(m) for m in re.findall(r'<rect[^>]*fill="rgb\((\d+),', svg)]
        assert len(fills) == grays.size
        # rects are emitted row-major in iz, ix order
        assert fills == [int(g) for g in grays.ravel()]

    def test_missing_sequence_exit_2(self, tmp_path):
        assert cli.main(["plot", "--sequence", str(tmp_path / "nope"),
                         "--out", str(tmp_path / "p.svg")]) == 2


class TestThreads:
    def test_env_var_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LOOKOUT_THREADS", "4")
        out = dataset(tmp_path)
        run = json.loads((out / "run_manifest.json").read_text())
        assert run["config"]["threads"] == 4
