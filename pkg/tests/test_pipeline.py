import json
import os

import numpy as np
import pytest

from src.config.config import HullScanConfig
from src.config.models import PipelineConfigModel, load_model, override
from src.core.errors import StageError
from src.core.modules.imaging import read_mask
from src.core.modules.metrics import compare_hulls
from src.core.modules.phantom import load_phantom_spec
from src.services import pipeline_service
from src.services.history_cache import HistoryCache
from src.services.pipeline_service import comparison_table, run_pipeline, select_algorithms, simulate


def read_journal(path: str):
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f]


def test_pipeline_writes_every_artifact(toy_pipeline, tmp_path):
    out = tmp_path / "out"
    result = run_pipeline(toy_pipeline, output_dir=str(out), threads=1)

    for name in ("truth", "fbp", "sc", "msc", "sm"):
        assert (out / "masks" / f"{name}.pctm").exists()
        assert (out / "images" / f"{name}_z00.pgm").exists()
    assert (out / "images" / "fbp_rsp_z00.pgm").exists()
    for name in ("histories.pcth", "cut_report.txt", "comparison.txt", "comparison.json", "report.txt",
                 "bench.json", "journal.jsonl"):
        assert (out / name).exists(), name
    assert not (out / "histories_noisy.pcth").exists()
    assert all(os.path.exists(path) for path in result.artifacts)

    assert result.history_count == toy_pipeline.scan.total_histories
    assert set(result.comparisons) == {"fbp", "sc", "msc", "sm"}
    assert all(d.seconds > 0 for d in result.detections.values())


def test_reported_comparisons_match_the_written_masks(toy_pipeline, tmp_path):
    out = tmp_path / "out"
    run_pipeline(toy_pipeline, output_dir=str(out), threads=1)
    truth = read_mask(str(out / "masks" / "truth.pctm"))
    with open(out / "comparison.json", 'r', encoding='utf-8') as f:
        summary = json.load(f)
    assert summary["truth_count"] == truth.count() > 0
    for name, numbers in summary["algorithms"].items():
        comparison = compare_hulls(truth, read_mask(str(out / "masks" / f"{name}.pctm")))
        assert (numbers["missing"], numbers["extra"]) == (comparison.missing, comparison.extra)

    report = (out / "report.txt").read_text(encoding="utf-8")
    assert "sans bruit WEPL" in report
    assert "Voxels manquants" in report and "Temps de calcul" in report


def test_single_algorithm(toy_pipeline, tmp_path):
    out = tmp_path / "out"
    result = run_pipeline(select_algorithms(toy_pipeline, ["sc"]), output_dir=str(out))
    assert sorted(os.listdir(out / "masks")) == ["sc.pctm", "truth.pctm"]
    assert list(result.comparisons) == ["sc"]


def test_results_do_not_depend_on_thread_count(toy_pipeline, tmp_path):
    one, three = tmp_path / "one", tmp_path / "three"
    run_pipeline(toy_pipeline, output_dir=str(one), threads=1)
    run_pipeline(toy_pipeline, output_dir=str(three), threads=3)
    for name in ["histories.pcth"] + [f"masks/{a}.pctm" for a in ("truth", "fbp", "sc", "msc", "sm")]:
        assert (one / name).read_bytes() == (three / name).read_bytes(), name


def test_missing_phantom_fails_in_config_stage(toy_pipeline, tmp_path):
    out = tmp_path / "out"
    config = override(toy_pipeline, phantom_file=str(tmp_path / "absent.json"))
    with pytest.raises(StageError) as excinfo:
        run_pipeline(config, output_dir=str(out))
    assert excinfo.value.stage == "config"
    assert excinfo.value.exit_code == 2
    entries = read_journal(str(out / "journal.jsonl"))
    assert entries[-1]["action"] == "CONFIG"
    assert entries[-1]["status"] == "FAILED"


def test_relative_phantom_path_uses_config_dir(toy_pipeline, tmp_path):
    config = override(toy_pipeline, phantom_file="disk.json")
    result = run_pipeline(select_algorithms(config, ["fbp"]), config_dir=str(tmp_path),
                          output_dir=str(tmp_path / "out"))
    assert result.truth.count() > 0


def test_journal_lists_each_stage(toy_pipeline, tmp_path):
    out = tmp_path / "out"
    stages = []
    run_pipeline(toy_pipeline, output_dir=str(out), on_stage=stages.append)
    actions = [entry["action"] for entry in read_journal(str(out / "journal.jsonl"))]
    assert actions == ["CONFIG", "PHANTOM", "SIMULATE", "CUT", "FBP", "SC", "MSC", "SM", "COMPARE", "REPORT"]
    assert stages == [a.lower() for a in actions]


def test_noisy_run_writes_noisy_histories(toy_pipeline, tmp_path):
    out = tmp_path / "out"
    config = select_algorithms(override(toy_pipeline, noisy=True), ["msc"])
    run_pipeline(config, output_dir=str(out))
    assert (out / "histories_noisy.pcth").exists()
    assert "avec bruit WEPL" in (out / "report.txt").read_text(encoding="utf-8")


def test_simulation_is_reused_from_cache(toy_pipeline, tmp_path, monkeypatch):
    cache = HistoryCache(str(tmp_path / "cache"))
    phantom = load_phantom_spec(toy_pipeline.phantom_file)
    first = simulate(phantom, toy_pipeline.scan, cache=cache)
    assert len(os.listdir(cache.cache_dir)) == 1

    def no_simulation(*args, **kwargs):
        raise AssertionError("simulation relancée")

    monkeypatch.setattr(pipeline_service, "generate_histories", no_simulation)
    second = simulate(phantom, toy_pipeline.scan, cache=cache)
    assert second.records.tobytes() == first.records.tobytes()


def test_noise_settings_share_the_cache_entry(toy_pipeline, tmp_path):
    cache = HistoryCache(str(tmp_path / "cache"))
    phantom = load_phantom_spec(toy_pipeline.phantom_file)
    simulate(phantom, toy_pipeline.scan, cache=cache)
    noisy_scan = toy_pipeline.scan.model_copy(
        update={"noise": toy_pipeline.scan.noise.model_copy(update={"enabled": True})})
    simulate(phantom, noisy_scan, cache=cache)
    assert len(os.listdir(cache.cache_dir)) == 1


def test_corrupt_cache_entry_is_ignored(toy_pipeline, tmp_path):
    cache = HistoryCache(str(tmp_path / "cache"))
    phantom = load_phantom_spec(toy_pipeline.phantom_file)
    first = simulate(phantom, toy_pipeline.scan, cache=cache)
    entry = os.path.join(cache.cache_dir, os.listdir(cache.cache_dir)[0])
    with open(entry, 'wb') as f:
        f.write(b"garbage")
    again = simulate(phantom, toy_pipeline.scan, cache=cache)
    np.testing.assert_array_equal(again.wepl, first.wepl)


def test_comparison_table_layout(toy_pipeline, tmp_path):
    result = run_pipeline(select_algorithms(toy_pipeline, ["sc", "msc"]), output_dir=str(tmp_path / "out"))
    lines = comparison_table(result.comparisons).splitlines()
    assert lines[0].split() == ["SC", "MSC"]
    assert lines[1].startswith("Voxels manquants")
    assert lines[2].split()[-2:] == [str(result.comparisons["sc"].extra), str(result.comparisons["msc"].extra)]


def test_geometry_warnings_flag_truncated_and_partial_fields(toy_pipeline, toy_phantom, tmp_path):
    warnings = pipeline_service.geometry_warnings(toy_pipeline, toy_phantom)
    assert len(warnings) == 2
    assert "fantôme" in warnings[0]

    result = run_pipeline(select_algorithms(toy_pipeline, ["sc"]), output_dir=str(tmp_path / "out"))
    assert result.warnings == warnings
    report = (tmp_path / "out" / "report.txt").read_text(encoding='utf-8')
    assert report.count("Avertissement") == 2


def test_shipped_desk_field_lies_inside_the_phantom_on_whole_levels():
    config = load_model(os.path.join(HullScanConfig.SHIPPED_CONFIG_DIR, "pipeline_desk.json"), PipelineConfigModel)
    phantom = load_phantom_spec(os.path.join(HullScanConfig.SHIPPED_CONFIG_DIR, config.phantom_file))
    assert pipeline_service.geometry_warnings(config, phantom) == []
