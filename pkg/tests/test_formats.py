import json

import numpy as np

from lookout import datasim, geom


class TestPly:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(40, 3))
        labels = rng.integers(0, 3, size=40)
        path = tmp_path / "cloud.ply"
        datasim.save_ply(path, pts, labels)
        pts2, labels2 = datasim.load_ply(path)
        assert np.abs(pts2 - pts).max() < 1e-6
        assert np.array_equal(labels2, labels)

    def test_header_is_ascii_ply(self, tmp_path):
        path = tmp_path / "cloud.ply"
        datasim.save_ply(path, np.zeros((1, 3)))
        head = path.read_text().splitlines()
        assert head[0] == "ply"
        assert head[1] == "format ascii 1.0"

    def test_missing_labels_default_zero(self, tmp_path):
        path = tmp_path / "c.ply"
        datasim.save_ply(path, np.ones((3, 3)))
        _, labels = datasim.load_ply(path)
        assert np.array_equal(labels, np.zeros(3))


class TestLoft:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        arr = rng.normal(size=(5, 4, 4, 8)).astype(np.float32)
        path = tmp_path / "x.loft"
        datasim.save_loft(path, arr)
        assert np.array_equal(datasim.load_loft(path), arr)

    def test_magic_and_layout(self, tmp_path):
        path = tmp_path / "x.loft"
        datasim.save_loft(path, np.zeros((2, 3), np.float32))
        raw = path.read_bytes()
        assert raw[:4] == b"LOFT"
        assert int.from_bytes(raw[4:8], "little") == 2  # rank
        assert int.from_bytes(raw[8:12], "little") == 2
        assert int.from_bytes(raw[12:16], "little") == 3
        assert len(raw) == 16 + 4 * 6


class TestTracks:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        agents = tuple(
            datasim.AgentTrack(rng.normal(size=(10, 2)), rng.normal(size=10),
                               float(rng.uniform(0.2, 0.4)))
            for _ in range(3)
        )
        path = tmp_path / "tracks.json"
        datasim.save_tracks(path, agents)
        loaded = datasim.load_tracks(path)
        assert len(loaded) == 3
        for a, b in zip(agents, loaded):
            assert np.abs(a.positions - b.positions).max() < 1e-12
            assert a.radius == b.radius


class TestDynamicDistances:
    def test_round_trip(self, tmp_path):
        dists = {0: 1.5, 6: 0.42, 12: 3.0}
        path = tmp_path / "dyn.txt"
        datasim.save_dynamic_distances(path, dists)
        assert datasim.load_dynamic_distances(path) == dists

    def test_comment_lines_skipped(self, tmp_path):
        path = tmp_path / "dyn.txt"
        path.write_text("# header\n3 0.5\n\n7 1.25\n")
        assert datasim.load_dynamic_distances(path) == {3: 0.5, 7: 1.25}


class TestSequence:
    def _make(self, seed=0):
        scene = datasim.gen_scene(seed, datasim.SceneConfig(duration_s=6.0))
        traj = datasim.gen_ego_trajectory(scene, seed, datasim.EgoConfig(n_steps=50))
        rcfg = datasim.RenderConfig()
        feats = np.stack([datasim.render_features(scene, p, rcfg, i).feature_map
                          for i, p in enumerate(traj.poses)])
        return datasim.Sequence(f"seq{seed}", traj, feats, rcfg.intrinsics(),
                                scene.static_points, scene.labels,
                                scene.dynamic_agents, scene.ground_height)

    def test_round_trip(self, tmp_path):
        seq = self._make()
        datasim.save_sequence(tmp_path / "s0", seq)
        loaded = datasim.load_sequence(tmp_path / "s0" / "seq.json")
        assert loaded.seq_id == seq.seq_id
        assert np.array_equal(loaded.features, seq.features)
        assert np.abs(loaded.cloud_points - seq.cloud_points).max() < 1e-6
        assert np.array_equal(loaded.cloud_labels, seq.cloud_labels)
        assert len(loaded.tracks) == len(seq.tracks)
        assert loaded.intrinsics == seq.intrinsics
        assert np.abs(loaded.trajectory.translations()
                      - seq.trajectory.translations()).max() < 1e-8

    def test_observation_accessor(self):
        seq = self._make()
        obs = seq.observation(7)
        assert np.array_equal(obs.feature_map, seq.features[7])
        assert obs.pose is seq.trajectory.poses[7]

    def test_dataset_manifest(self, tmp_path):
        seq = self._make()
        datasim.save_sequence(tmp_path / "s0", seq)
        with open(tmp_path / "manifest.json", "w") as fh:
            json.dump({"sequences": ["s0/seq.json"]}, fh)
        seqs = datasim.load_dataset(tmp_path)
        assert len(seqs) == 1 and seqs[0].seq_id == seq.seq_id
