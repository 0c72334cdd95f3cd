import json


from lavdm_kit.cli import main
from lavdm_kit.containers import read_container


class TestCli:
    def test_gen_vdm_lavdm_pipeline(self, tmp_path):
        cloud = tmp_path / "cloud.csv"
        assert main([
            "gen", "--chart", "dsphere", "--n", "60", "--density", "acg",
            "--sigma", "1,1,0.8", "--seed", "5", "--out", str(cloud),
        ]) == 0
        header = cloud.read_text().splitlines()[0]
        assert header == "idx,x0,x1,x2,u,v"

        spec = tmp_path / "spec.lvdm"
        assert main([
            "vdm", "--input", str(cloud), "--epsilon", "0.5", "--alpha", "0.5",
            "--r", "4", "--chart", "dsphere", "--out", str(spec),
        ]) == 0
        sections = dict(read_container(spec))
        assert sections["SPC"].shape == (120, 4)
        sidecar = json.loads((tmp_path / "spec.lvdm.json").read_text())
        assert sidecar["n"] == 60 and sidecar["q"] == 2 and sidecar["alpha"] == 0.5

        lspec = tmp_path / "lspec.lvdm"
        assert main([
            "lavdm", "--input", str(cloud), "--epsilon", "0.5", "--alpha", "0.0",
            "--beta", "0.5", "--landmarks", "subset:20", "--r", "4",
            "--chart", "dsphere", "--seed", "1", "--out", str(lspec),
        ]) == 0
        sidecar = json.loads((tmp_path / "lspec.lvdm.json").read_text())
        assert sidecar["m"] == 20 and sidecar["beta"] == 0.5
        assert sidecar["landmark_mode"] == "subset"

    def test_designed_landmarks_from_csv(self, tmp_path):
        cloud = tmp_path / "cloud.csv"
        marks = tmp_path / "marks.csv"
        main(["gen", "--chart", "sphere", "--n", "50", "--seed", "2", "--out", str(cloud)])
        main(["gen", "--chart", "sphere", "--n", "10", "--seed", "3", "--out", str(marks)])
        out = tmp_path / "o.lvdm"
        assert main([
            "lavdm", "--input", str(cloud), "--landmarks", str(marks),
            "--epsilon", "0.5", "--chart", "sphere", "--out", str(out),
        ]) == 0
        sidecar = json.loads((tmp_path / "o.lvdm.json").read_text())
        assert sidecar["landmark_mode"] == "designed" and sidecar["m"] == 10

    def test_run_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('experiment = "beta_sweep"\nepsilonn = 1.0\n')
        assert main(["run", "--config", str(bad)]) == 2

    def test_run_tiny_experiment(self, tmp_path, capsys):
        cfgfile = tmp_path / "cfg.toml"
        cfgfile.write_text(
            'experiment = "double_transport_scaling"\n'
            "eps_grid = [0.2, 0.1]\ntrials = 16\node_steps = 200\n"
            f'output_dir = "{tmp_path}/runs"\n'
        )
        assert main(["run", "--config", str(cfgfile)]) == 0
        out = capsys.readouterr().out
        assert "error_slope_vs_eps" in out

    def test_truth_frames_need_chart(self, tmp_path):
        cloud = tmp_path / "c.csv"
        main(["gen", "--chart", "sphere", "--n", "30", "--seed", "1", "--out", str(cloud)])
        assert main([
            "vdm", "--input", str(cloud), "--epsilon", "0.5", "--out",
            str(tmp_path / "x.lvdm"),
        ]) == 1
