import numpy as np
import pytest

from lookout import datasim, evalkit, geom
from lookout.errors import (
    EmptyCloud,
    InconsistentClipSets,
    LengthMismatch,
    MissingDynamicData,
)
from lookout.model import VoxelGridSpec

GRID = VoxelGridSpec.desk()


class TestBuildOccupancy:
    def test_single_point_single_cell(self):
        occ = evalkit.build_occupancy(np.array([[0.15, -0.3, 0.15]]), GRID)
        assert occ.occupied.sum() == 1
        assert occ.counts.sum() == 1

    def test_boundary_floor_rule(self):
        # a point exactly on a cell boundary lands in the higher-index cell
        # (grid chosen so the boundary is exactly representable)
        grid = VoxelGridSpec(nz=4, ny=4, nx=4, spacing=0.5, origin=(-1.0, -1.0, -1.0))
        p = np.array([[-0.5, -0.99, -0.99]])
        occ = evalkit.build_occupancy(p, grid)
        assert occ.counts[0, 0, 1] == 1

    def test_out_of_grid_dropped(self):
        occ = evalkit.build_occupancy(np.array([[99.0, 0, 0], [0, -99.0, 0]]), GRID)
        assert occ.counts.sum() == 0

    def test_min_points_threshold(self):
        pts = np.tile(np.array([[0.1, -0.3, 0.1]]), (2, 1))
        occ = evalkit.build_occupancy(pts, GRID, min_points=3)
        assert occ.counts.sum() == 2
        assert not occ.occupied.any()

    def test_loop_oracle(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-4, 4, size=(500, 3))
        occ = evalkit.build_occupancy(pts, GRID)
        expect = np.zeros_like(occ.counts)
        x0, y0, z0 = GRID.origin
        for p in pts:
            ix = int(np.floor((p[0] - x0) / GRID.spacing))
            iy = int(np.floor((p[1] - y0) / GRID.spacing))
            iz = int(np.floor((p[2] - z0) / GRID.spacing))
            if 0 <= ix < GRID.nx and 0 <= iy < GRID.ny and 0 <= iz < GRID.nz:
                expect[iz, iy, ix] += 1
        assert np.array_equal(occ.counts, expect)


class TestHeightmap:
    def test_column_max(self):
        pts = np.array([[0.1, -0.95, 0.1], [0.1, 0.25, 0.1]])
        occ = evalkit.build_occupancy(pts, GRID)
        hm = evalkit.heightmap(occ)
        iz = int(np.floor((0.1 - GRID.origin[2]) / GRID.spacing))
        ix = int(np.floor((0.1 - GRID.origin[0]) / GRID.spacing))
        iy = int(np.floor((0.25 - GRID.origin[1]) / GRID.spacing))
        expect = GRID.origin[1] + (iy + 0.5) * GRID.spacing
        assert hm[iz, ix] == pytest.approx(expect)

    def test_empty_grid_all_sentinel(self):
        occ = evalkit.build_occupancy(np.zeros((0, 3)), GRID)
        assert np.isnan(evalkit.heightmap(occ)).all()

    def test_column_scan_oracle(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-3, 3, size=(300, 3))
        occ = evalkit.build_occupancy(pts, GRID)
        hm = evalkit.heightmap(occ)
        heights = GRID.origin[1] + (np.arange(GRID.ny) + 0.5) * GRID.spacing
        for iz in range(GRID.nz):
            for ix in range(GRID.nx):
                col = occ.occupied[iz, :, ix]
                if col.any():
                    assert hm[iz, ix] == pytest.approx(heights[col].max())
                else:
                    assert np.isnan(hm[iz, ix])


class TestNearestStatic:
    def test_single_point(self):
        assert evalkit.nearest_static_distance(
            [0, 0, 0], np.array([[0.2, 0, 0]])) == pytest.approx(0.2)

    def test_coincident_zero(self):
        pts = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
        assert evalkit.nearest_static_distance([1.0, 2.0, 3.0], pts) == 0.0

    def test_matches_brute_force_10k(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-10, 10, size=(10000, 3))
        for _ in range(20):
            q = rng.uniform(-12, 12, size=3)
            brute = np.linalg.norm(pts - q, axis=1).min()
            assert abs(evalkit.nearest_static_distance(q, pts) - brute) < 1e-6

    def test_empty_cloud(self):
        with pytest.raises(EmptyCloud):
            evalkit.nearest_static_distance([0, 0, 0], np.zeros((0, 3)))


class TestColStatic:
    def test_threshold_examples(self):
        cloud = np.array([[0.0, 0.0, 0.0]])
        pred = np.tile(np.array([[0.2, 0.0, 0.0]]), (8, 1))
        assert evalkit.col_static([pred], cloud, 15) == 100.0
        assert evalkit.col_static([pred], cloud, 25) == 0.0

    def test_counting(self):
        cloud = np.array([[0.0, 0.0, 0.0]])
        near = np.tile([[0.1, 0, 0]], (4, 1))
        far = np.tile([[1.0, 0, 0]], (4, 1))
        pred = np.concatenate([near, far])
        assert evalkit.col_static([pred], cloud, 50) == 50.0

    def test_pooled_over_clips(self):
        cloud = np.array([[0.0, 0.0, 0.0]])
        a = np.tile([[1.0, 0, 0]], (8, 1))
        b = np.tile([[0.01, 0, 0]], (8, 1))
        assert evalkit.col_static([a, b], cloud, 15) == 50.0

    def test_index_equals_brute_force(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            cloud = rng.uniform(-5, 5, size=(200, 3))
            preds = [rng.uniform(-5, 5, size=(8, 3)) for _ in range(3)]
            for k in (15, 25, 35):
                fast = evalkit.col_static(preds, cloud, k)
                flat = np.concatenate(preds)
                dists = np.array([np.linalg.norm(cloud - p, axis=1).min() for p in flat])
                brute = 100.0 * np.mean(dists >= k / 100.0)
                assert fast == brute, trial

    def test_monotone_in_k(self):
        rng = np.random.default_rng(4)
        cloud = rng.uniform(-3, 3, size=(100, 3))
        preds = [rng.uniform(-3, 3, size=(8, 3)) for _ in range(5)]
        vals = [evalkit.col_static(preds, cloud, k) for k in (15, 25, 35)]
        assert vals[0] >= vals[1] >= vals[2]


class TestColDynamic:
    def _track(self, pos, radius=0.0, n=200):
        return datasim.AgentTrack(np.tile(np.asarray(pos, dtype=float), (n, 1)),
                                  np.zeros(n), radius)

    def test_threshold(self):
        track = self._track([0.30, 0.0])
        pred = np.tile([[0.0, 1.0, 0.0]], (8, 1))
        fis = [list(range(8))]
        assert evalkit.col_dynamic([pred], fis, 25, tracks=[track]) == 100.0
        assert evalkit.col_dynamic([pred], fis, 35, tracks=[track]) == 0.0

    def test_radius_subtracted(self):
        track = self._track([0.50, 0.0], radius=0.3)
        pred = np.tile([[0.0, 1.0, 0.0]], (8, 1))
        assert evalkit.col_dynamic([pred], [list(range(8))], 25,
                                   tracks=[track]) == 0.0

    def test_no_agents_vacuous_pass(self):
        pred = np.zeros((8, 3))
        for k in (15, 25, 35):
            assert evalkit.col_dynamic([pred], [list(range(8))], k, tracks=[]) == 100.0

    def test_track_vs_file_consistency(self):
        rng = np.random.default_rng(5)
        tracks = [self._track(rng.uniform(-2, 2, size=2), radius=0.3),
                  self._track(rng.uniform(-2, 2, size=2), radius=0.25)]
        preds = [rng.uniform(-2, 2, size=(8, 3)) for _ in range(3)]
        fis = [list(range(i * 8, i * 8 + 8)) for i in range(3)]
        distances = {}
        for pred, fi in zip(preds, fis):
            d = evalkit.step_dynamic_distances(pred, fi, tracks)
            distances.update(dict(zip(fi, d)))
        for k in (15, 25, 35):
            track_mode = evalkit.col_dynamic(preds, fis, k, tracks=tracks)
            file_mode = evalkit.col_dynamic(preds, fis, k, distances=distances)
            assert track_mode == file_mode

    def test_missing_data(self):
        pred = np.zeros((8, 3))
        with pytest.raises(MissingDynamicData):
            evalkit.col_dynamic([pred], [list(range(8))], 15)
        with pytest.raises(MissingDynamicData):
            evalkit.col_dynamic([pred], [list(range(8))], 15, distances={0: 1.0})


class TestL1Metrics:
    def test_zero_on_gt(self):
        poses = [geom.Pose.identity()] * 8
        assert evalkit.l1_metrics(poses, poses) == (0.0, 0.0)

    def test_translation_offset(self):
        gt = [geom.Pose.identity()] * 8
        pred = [geom.Pose(np.array([0.1, 0, 0]), geom.IDENTITY_ROT6D)] * 8
        t, r = evalkit.l1_metrics(pred, gt)
        assert t == pytest.approx(0.1) and r == pytest.approx(0.0)

    def test_90deg_yaw_is_4(self):
        gt = [geom.Pose.identity()] * 8
        pred = [geom.Pose.from_matrix(np.zeros(3), geom.yaw_matrix(np.pi / 2))] * 8
        t, r = evalkit.l1_metrics(pred, gt)
        assert r == pytest.approx(4.0, abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            evalkit.l1_metrics([geom.Pose.identity()], [geom.Pose.identity()] * 2)


def make_eval_clips(n=3):
    rng = np.random.default_rng(6)
    cloud = rng.uniform(-4, 4, size=(200, 3))
    track = datasim.AgentTrack(rng.uniform(-3, 3, size=(100, 2)), np.zeros(100), 0.3)
    clips = []
    for i in range(n):
        anchor = geom.Pose(rng.uniform(-1, 1, size=3) + [0, 1.6, 0], geom.IDENTITY_ROT6D)
        frame = geom.canonical_frame_of(anchor)
        gt = [geom.Pose(np.array([0, 0, 0.1 * (k + 1)]), geom.IDENTITY_ROT6D)
              for k in range(8)]
        clips.append(evalkit.ClipEval(
            clip_id=f"c{i}", gt_canonical=gt, frame=frame,
            frame_indices=tuple(range(i * 8, i * 8 + 8)),
            cloud_points=cloud, tracks=(track,)))
    return clips


class TestReport:
    def test_gt_row_zero_l1(self):
        clips = make_eval_clips()
        report = evalkit.make_report({}, clips)
        assert report.rows[0]["method"] == "gt"
        assert report.rows[0]["L1_trans"] == 0.0
        assert report.rows[0]["L1_rot"] == 0.0

    def test_avg_columns_exact(self):
        clips = make_eval_clips()
        preds = {c.clip_id: [geom.Pose(np.array([0.2, 0, 0.1 * k]),
                                       geom.IDENTITY_ROT6D) for k in range(8)]
                 for c in clips}
        report = evalkit.make_report({"m": preds}, clips)
        for row in report.rows:
            for which in ("stt", "dyn"):
                ks = [row[f"Col_{which}_{k}"] for k in (15, 25, 35)]
                assert row[f"Col_{which}_avg"] == pytest.approx(np.mean(ks))
                assert ks[0] >= ks[1] >= ks[2]

    def test_csv_columns(self):
        clips = make_eval_clips()
        report = evalkit.make_report({}, clips)
        header = report.to_csv().splitlines()[0]
        assert header == ("method,L1_trans,L1_rot,Col_stt_15,Col_dyn_15,"
                          "Col_stt_25,Col_dyn_25,Col_stt_35,Col_dyn_35,"
                          "Col_stt_avg,Col_dyn_avg")

    def test_byte_identical_reruns(self):
        clips = make_eval_clips()
        preds = {c.clip_id: c.gt_canonical for c in clips}
        a = evalkit.make_report({"m": preds}, clips)
        b = evalkit.make_report({"m": preds}, clips)
        assert a.to_csv() == b.to_csv()
        assert a.to_text() == b.to_text()

    def test_inconsistent_clip_sets(self):
        clips = make_eval_clips()
        preds = {c.clip_id: c.gt_canonical for c in clips[:-1]}
        with pytest.raises(InconsistentClipSets):
            evalkit.make_report({"m": preds}, clips)


class TestHeightmapPgm:
    def test_header_and_values(self, tmp_path):
        hm = np.array([[0.5, np.nan], [1.0, 0.0]])
        path = tmp_path / "hm.pgm"
        evalkit.save_heightmap_pgm(path, hm)
        lines = path.read_text().splitlines()
        assert lines[0] == "P2"
        assert lines[1] == "2 2"
        assert lines[2] == "65535"
        vals = np.array([[int(v) for v in line.split()] for line in lines[3:]])
        assert vals[0, 1] == 0  # NaN sentinel
        assert vals[1, 0] == 65535  # max height
        assert vals[1, 1] == 1  # min height
