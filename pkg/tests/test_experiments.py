import json


from lavdm_kit import build_config, run_experiment


def tiny_sweep_config(**over):
    base = dict(
        experiment="landmark_sweep", chart="klein", n=120, m_grid=[20, 40],
        epsilon=0.8, r=3, trials=2, seed=11,
    )
    base.update(over)
    return build_config(base)


class TestRunner:
    def test_sweep_schema_and_coverage(self, tmp_path):
        cfg = tiny_sweep_config()
        res = run_experiment(cfg, out_root=tmp_path)
        header = res.csv_path.read_text().splitlines()[0]
        assert header == (
            "exp,trial,l,m,beta,alpha,ratio,cosine,alignedL2,"
            "median_I2,mad_I2,median_Ia,mad_Ia,median_Im,mad_Im"
        )
        # one row per (grid point, trial, eigenpair)
        assert len(res.rows) == 2 * 2 * 3
        assert (res.out_dir / "config.echo.toml").exists()
        manifest = json.loads(res.manifest_path.read_text())
        assert manifest["rows"] == len(res.rows)
        assert "numpy" in manifest["versions"]

    def test_bit_reproducible_csv(self, tmp_path):
        cfg = tiny_sweep_config()
        r1 = run_experiment(cfg, out_root=tmp_path / "one")
        r2 = run_experiment(cfg, out_root=tmp_path / "two")
        assert r1.csv_path.read_bytes() == r2.csv_path.read_bytes()

    def test_seed_changes_output(self, tmp_path):
        r1 = run_experiment(tiny_sweep_config(), out_root=tmp_path / "one")
        r2 = run_experiment(tiny_sweep_config(seed=12), out_root=tmp_path / "two")
        assert r1.csv_path.read_bytes() != r2.csv_path.read_bytes()

    def test_eigen_recovery_single_grid_point(self, tmp_path):
        cfg = build_config(dict(
            experiment="eigen_recovery", chart="dsphere", n=150, m=40,
            epsilon=0.6, r=4, trials=1, seed=3,
        ))
        res = run_experiment(cfg, out_root=tmp_path)
        assert len(res.rows) == 4

    def test_timing_minimal_run_emits_all_stages(self, tmp_path):
        cfg = build_config(dict(
            experiment="timing_scaling", chart="klein", n=200, m=1,
            m_grid=[1], n_grid=[100, 200], epsilon=0.8, r=1, trials=1,
            svd_method="dense", trunc=float("inf"),
        ))
        res = run_experiment(cfg, out_root=tmp_path)
        stages = {row[1] for row in res.rows}
        assert stages == {"assembly", "degrees", "scale", "svd"}
        assert "svd_slope_vs_m" in res.manifest["summary"]

    def test_double_transport_summary_slope(self, tmp_path):
        cfg = build_config(dict(
            experiment="double_transport_scaling", eps_grid=[0.2, 0.05],
            trials=32, ode_steps=300, seed=2,
        ))
        res = run_experiment(cfg, out_root=tmp_path)
        assert len(res.rows) == 2
        assert res.manifest["summary"]["error_slope_vs_eps"] > 0.8

    def test_effective_transport_rows(self, tmp_path):
        cfg = build_config(dict(
            experiment="effective_transport", m_grid=[15, 25], trials=3, seed=4,
        ))
        res = run_experiment(cfg, out_root=tmp_path)
        assert len(res.rows) == 6
        header = res.csv_path.read_text().splitlines()[0]
        assert header == "exp,trial,m,l2_error"
        assert "median_error_m15" in res.manifest["summary"]

    def test_parallel_jobs_match_sequential(self, tmp_path):
        cfg = tiny_sweep_config()
        seq = run_experiment(cfg, out_root=tmp_path / "seq", jobs=1)
        par = run_experiment(cfg, out_root=tmp_path / "par", jobs=2)
        assert seq.csv_path.read_bytes() == par.csv_path.read_bytes()
