import pytest

from evmlink.link import EvmAveraging, OutputError
from evmlink.schemas import RunConfig
from evmlink.services.studies import StudyRunner, run_study

GRID = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0]

def _verdicts(config):
    summary, tables = StudyRunner(config).run()
    return {v.criterion: v for v in summary.verdicts}, summary, tables

def test_default_qam_compare_reproduces_the_gradient_trend():
    config = RunConfig(study="qam-compare", carriers=240, frames=10, seeds=1, sinr_grid_db=GRID)
    verdicts, summary, tables = _verdicts(config)
    for criterion in ("table-i-64", "table-i-256", "table-i-monotone", "table-i-interferers", "qpsk-guard"):
        assert verdicts[criterion].passed, criterion
    assert summary.headline["evm_normalization"] == "bit-energy"
    assert len(tables["table-i.csv"]) == 8 * 3

def test_default_iteration_study_converges_by_ten_frames():
    config = RunConfig(study="iteration-study", trials=4, frames_list=[2, 10, 20])
    assert config.evm_averaging == EvmAveraging.PER_CARRIER
    verdicts, summary, _ = _verdicts(config)
    assert verdicts["iteration-converged"].passed
    assert verdicts["iteration-two-frames"].passed
    assert summary.headline["evm_averaging"] == "per-carrier"

def test_default_mmimo_run_predicts_within_two_db():
    config = RunConfig(study="mmimo", band_hz=20e6, blocks=3)
    verdicts, summary, _ = _verdicts(config)
    assert verdicts["mmimo-2db"].passed
    assert verdicts["zf-leakage"].passed
    assert summary.headline["n_records"] == 3 * 3 * 10

def test_default_bandwidth_sweep_spread_is_smallest_at_two_megahertz():
    config = RunConfig(
        study="bandwidth-sweep",
        band_hz=20e6,
        sub_band_list_hz=[1e6, 2e6, 20e6],
        realizations=100,
    )
    assert config.n_tx == 12
    verdicts, _, tables = _verdicts(config)
    assert verdicts["sweep-narrow"].passed
    assert verdicts["sweep-wide"].passed
    assert tables["fig10.csv"]["carriers"].tolist() == [60, 120, 1200]

def test_write_failures_surface_as_output_errors(fit_run_config, tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("not a directory")
    with pytest.raises(OutputError) as excinfo:
        run_study(fit_run_config, blocker)
    assert excinfo.value.details["path"] == str(blocker)
