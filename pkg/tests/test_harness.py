import json

import pandas as pd
import pytest
from pydantic import ValidationError

from config import CONFIGS_DIR
from devsim.models import AttackKind, TraceError
from harness.audit import audit, write_audit
from harness.cli import main
from harness.discovery import signature_discovery_report
from harness.growth import chain_growth_report, control_block_size
from harness.io import load_experiment_config, parse_config_values
from harness.metrics import convergence_time
from harness.models import AttackConfig, ExperimentConfig
from harness.runner import Run, run_experiment
from harness.sweep import fit_midpoint, is_monotone, sweep_configs
from sigcore.signatures import compute_signature

from conftest import LIFX_API, NTP


def write_env(path, **values):
    path.write_text("\n".join(f"{k.upper()}={v}" for k, v in values.items()) + "\n")
    return path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    config = ExperimentConfig(name="small", sentinels=3, duration=600.0, seeds=[7], output_dir=str(out))
    report = run_experiment(config)
    return report, out / "small" / "seed-7"


class TestConfigFiles:
    def test_parse_values(self):
        data = parse_config_values(
            {
                "NAME": "x",
                "Sentinels": "5",
                "DEVICES": "lifx-like, plug-like",
                "SEEDS": "1,2",
                "ATTACK_KIND": "SCAN",
                "ATTACK_FRACTION": "0.1",
                "DEGREE": "",
            }
        )
        cfg = ExperimentConfig(**data)
        assert cfg.sentinels == 5
        assert cfg.devices == ["lifx-like", "plug-like"]
        assert cfg.seeds == [1, 2]
        assert cfg.attack == AttackConfig(kind=AttackKind.SCAN, fraction=0.1)
        assert cfg.degree is None

    @pytest.mark.parametrize("path", sorted(CONFIGS_DIR.glob("*.env")), ids=lambda p: p.stem)
    def test_bundled_configs_load(self, path):
        cfg = load_experiment_config(path)
        assert cfg.name

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_experiment_config(tmp_path / "none.env")

    @pytest.mark.parametrize(
        "values",
        [
            {"sentinels": "0"},
            {"duration": "-5"},
            {"attack_fraction": "1.5"},
            {"latency_min_ms": "200", "latency_max_ms": "100"},
            {"pow_mode": "QUANTUM"},
        ],
    )
    def test_invalid_values(self, tmp_path, values):
        with pytest.raises(ValidationError):
            load_experiment_config(write_env(tmp_path / "bad.env", **values))


class TestCli:
    def test_invalid_config_exit_code(self, tmp_path):
        path = write_env(tmp_path / "bad.env", sentinels="-1")
        assert main(["run", "--config", str(path)]) == 2

    def test_missing_config_exit_code(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.env")]) == 2

    def test_unknown_label_exit_code(self, tmp_path):
        path = write_env(tmp_path / "fridge.env", devices="fridge-like", duration=60)
        assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_run_writes_reports(self, tmp_path):
        path = write_env(tmp_path / "tiny.env", name="tiny", sentinels=2, duration=200, seeds="3,4")
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == 0
        for seed in (3, 4):
            run_dir = tmp_path / "out" / "tiny" / f"seed-{seed}"
            assert (run_dir / "report.json").is_file()
            assert (run_dir / "export" / "manifest.json").is_file()

    def test_audit_missing_export(self, tmp_path):
        assert main(["audit", "--export", str(tmp_path / "nope")]) == 2


class TestRun:
    def test_unknown_label(self):
        with pytest.raises(TraceError):
            Run(ExperimentConfig(devices=["fridge-like"]), 0)

    def test_attack_target_must_be_a_device(self):
        config = ExperimentConfig(attack=AttackConfig(fraction=0.5, target_label="plug-like"))
        with pytest.raises(ValueError):
            Run(config, 0)

    def test_wiring(self):
        run = Run(ExperimentConfig(sentinels=4, devices=["lifx-like", "plug-like"], free_riders=0.25), 1)
        assert len(run.sentinels) == 4
        assert len(run.devices) == 8
        assert len(run.free_riders) == 1
        assert {d.device_id for d in run.devices} >= {"s0000/d0", "s0000/d1"}

    def test_small_run_converges(self, small_run):
        report, _ = small_run
        assert len(report.chains) == 1
        chain = report.chains[0]
        assert chain.label == "lifx-like"
        assert chain.subscribers == 3
        assert chain.converged
        assert chain.convergence_time is not None
        assert chain.whitelist_size == 2
        assert report.control.height > 10
        assert sum(s.wins for s in report.sentinels) >= report.control.height
        assert all(s.profile_passed > 0 for s in report.sentinels)

    def test_artifacts(self, small_run):
        report, run_dir = small_run
        assert report.artifacts == {
            "export": "export",
            "events": "events.jsonl",
            "chains": "chains.csv",
            "sentinels": "sentinels.csv",
            "growth": "growth.csv",
        }
        for name in report.artifacts.values():
            assert (run_dir / name).exists()
        saved = json.loads((run_dir / "report.json").read_text())
        assert saved["seed"] == 7

    def test_deterministic(self, small_config, tmp_path):
        run_experiment(small_config, output_dir=tmp_path / "a")
        run_experiment(small_config, output_dir=tmp_path / "b")
        for name in ("report.json", "events.jsonl", "chains.csv", "export/manifest.json"):
            a = (tmp_path / "a" / "small" / "seed-7" / name).read_bytes()
            b = (tmp_path / "b" / "small" / "seed-7" / name).read_bytes()
            assert a == b, name

    def test_seeds_differ(self, small_config):
        a = run_experiment(small_config, seed=1, write=False)
        b = run_experiment(small_config, seed=2, write=False)
        assert [s.wins for s in a.sentinels] != [s.wins for s in b.sentinels]


class TestMetrics:
    def test_convergence_time(self, lifx_chain):
        samples = [(20.0, {lifx_chain: False}), (40.0, {lifx_chain: True}), (60.0, {lifx_chain: True})]
        assert convergence_time(samples, lifx_chain) == 40.0

    def test_divergent_at_end(self, lifx_chain):
        samples = [(20.0, {lifx_chain: True}), (40.0, {lifx_chain: False})]
        assert convergence_time(samples, lifx_chain) is None

    def test_unsubscribed_samples_skipped(self, lifx_chain):
        samples = [(20.0, {}), (40.0, {lifx_chain: True})]
        assert convergence_time(samples, lifx_chain) == 40.0


class TestGrowth:
    def test_report(self, small_run):
        _, run_dir = small_run
        report = chain_growth_report(run_dir / "export", bucket=300.0)
        assert report.device_types == 1
        assert report.control_block_size == control_block_size(1) == 148
        assert report.header_step == 32
        assert report.blocks_per_year > 0
        assert {r.chain for r in report.rows} >= {"control"}
        assert sum(r.blocks for r in report.rows if r.chain == "control") > 10

    def test_projection_scales_with_device_types(self, small_run):
        _, run_dir = small_run
        one = chain_growth_report(run_dir / "export", device_types=1)
        ten = chain_growth_report(run_dir / "export", device_types=10)
        assert ten.control_block_size - one.control_block_size == 9 * 32

    def test_missing_export(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            chain_growth_report(tmp_path / "missing")


class TestDiscovery:
    @pytest.fixture(scope="class")
    def report(self):
        return signature_discovery_report(["tablet-like", "lifx-like"], duration=1200.0, bucket=60.0, seed=5)

    def totals(self, report, label):
        (t,) = [t for t in report.totals if t.label == label]
        return t

    def curve(self, report, label):
        return [r.cumulative for r in sorted(report.rows, key=lambda r: r.bucket) if r.label == label]

    def test_tablet_keeps_growing(self, report):
        tablet = self.totals(report, "tablet-like")
        assert tablet.trace_signatures == 200
        assert 100 < tablet.discovered < 200
        assert tablet.saturated_at is None
        assert tablet.late_new > 0
        curve = self.curve(report, "tablet-like")
        assert len(curve) == 20
        assert curve[-1] > curve[14] > curve[4]

    def test_lifx_plateaus(self, report):
        lifx = self.totals(report, "lifx-like")
        assert lifx.trace_signatures == lifx.discovered == 2
        assert lifx.saturated_at < 60.0
        assert lifx.late_new == 0
        assert set(self.curve(report, "lifx-like")[1:]) == {2}

    def test_same_seed_same_curves(self, report):
        again = signature_discovery_report(["tablet-like", "lifx-like"], duration=1200.0, bucket=60.0, seed=5)
        assert again == report

    def test_all_bundled_by_default(self):
        report = signature_discovery_report(duration=60.0)
        assert {t.label for t in report.totals} == {"lifx-like", "plug-like", "tablet-like"}

    def test_bad_window(self):
        with pytest.raises(ValueError):
            signature_discovery_report(["lifx-like"], duration=0.0)

    def test_cli_writes_tables(self, tmp_path):
        argv = ["signatures", "--devices", "lifx-like,tablet-like", "--duration", "600", "--out", str(tmp_path)]
        assert main(argv) == 0
        totals = pd.read_csv(tmp_path / "discovery" / "discovery_totals.csv")
        assert sorted(totals["label"]) == ["lifx-like", "tablet-like"]
        curves = pd.read_csv(tmp_path / "discovery" / "discovery.csv")
        assert set(curves.columns) == {"label", "bucket", "new_signatures", "cumulative"}
        assert len(curves) == 20

    def test_cli_unknown_label(self, tmp_path):
        assert main(["signatures", "--devices", "fridge-like", "--out", str(tmp_path)]) == 2


class TestAudit:
    def test_clean_run(self, small_run, tmp_path):
        _, run_dir = small_run
        report = audit(run_dir / "export")
        assert report.rejected_forks == []
        assert report.errors == []
        assert report.founder_warnings == []
        canonical = {s.signature for s in report.signatures if s.canonical}
        assert canonical == {compute_signature(NTP).hex, compute_signature(LIFX_API).hex}
        assert all(s.confirmed is not None for s in report.signatures if s.canonical)
        files = write_audit(report, tmp_path / "audit")
        assert set(files.values()) == {"forks.csv", "signatures.csv", "adoption.csv"}
        assert (tmp_path / "audit" / "audit.json").is_file()

    def test_single_subscriber_warned(self, tmp_path):
        config = ExperimentConfig(name="solo", sentinels=1, duration=600.0, output_dir=str(tmp_path))
        run_experiment(config)
        report = audit(tmp_path / "solo" / "seed-0" / "export")
        assert len(report.founder_warnings) == 1


class TestSweepHelpers:
    def test_monotone(self):
        assert is_monotone([0.0, 0.0, 0.2, 1.0, 1.0])
        assert is_monotone([0.0, 0.4, 0.2, 1.0])
        assert not is_monotone([0.0, 1.0, 0.0])

    def test_midpoint(self):
        fractions = [0.2, 0.4, 0.45, 0.55, 0.6, 0.8]
        assert fit_midpoint(fractions, [0, 0, 0.2, 0.8, 1, 1]) == pytest.approx(0.5, abs=0.03)

    def test_no_midpoint_for_flat_curve(self):
        assert fit_midpoint([0.2, 0.4, 0.6], [0, 0, 0]) is None

    def test_jobs(self, small_config):
        jobs = sweep_configs(small_config, [0.2, 0.6], 3)
        assert len(jobs) == 6
        assert [seed for _, _, seed in jobs[:3]] == [7, 8, 9]
        assert all(cfg["attack"]["kind"] == "EXFIL" and not cfg["record_events"] for _, cfg, _ in jobs)
        assert [f for f, _, _ in jobs] == [0.2] * 3 + [0.6] * 3
