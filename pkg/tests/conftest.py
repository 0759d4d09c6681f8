import numpy as np
import pytest

from src.config.models import (AlgorithmThresholdsModel, GridSpecModel, PipelineConfigModel,
                               ScanConfigModel, ScatterModel)
from src.core.modules.geometry import GridSpec
from src.core.modules.phantom import EllipseRegion, PhantomSpec, save_phantom_spec
from src.core.modules.simulator import HISTORY_DTYPE, HistoryBatch


def make_batch(entries, exits, wepl=0.0, angle=0.0, exit_angle=0.0,
               exit_vertical_angle=0.0) -> HistoryBatch:
    """Lot d'historiques construit à la main (entrées/sorties en mm)"""
    entries = np.atleast_2d(np.asarray(entries, dtype=np.float64))
    exits = np.atleast_2d(np.asarray(exits, dtype=np.float64))
    records = np.zeros(len(entries), dtype=HISTORY_DTYPE)
    records["projection_angle"] = angle
    records["entry_x"], records["entry_y"], records["entry_z"] = entries.T
    records["exit_x"], records["exit_y"], records["exit_z"] = exits.T
    records["exit_angle"] = exit_angle
    records["exit_vertical_angle"] = exit_vertical_angle
    records["wepl"] = wepl
    return HistoryBatch(records)


def disk_spec(grid: GridSpec, radius: float, rsp: float = 1.0) -> PhantomSpec:
    return PhantomSpec(grid, [EllipseRegion((0.0, 0.0), radius, radius, rsp, name="disk")], "disk")


@pytest.fixture
def toy_grid() -> GridSpec:
    return GridSpec.centered(40, 40, 4)


@pytest.fixture
def toy_phantom(toy_grid) -> PhantomSpec:
    return disk_spec(toy_grid, 10.0)


@pytest.fixture
def toy_scan() -> ScanConfigModel:
    return ScanConfigModel(num_projections=90, angular_step=4.0, protons_per_projection=256,
                           field_width=40.0, field_height=4.0, scanner_radius=30.0,
                           scatter=ScatterModel(enabled=False), seed=7)


@pytest.fixture
def toy_pipeline(tmp_path, toy_phantom, toy_scan) -> PipelineConfigModel:
    phantom_file = tmp_path / "disk.json"
    save_phantom_spec(toy_phantom, str(phantom_file))
    return PipelineConfigModel(
        name="toy",
        phantom_file=str(phantom_file),
        scan=toy_scan,
        thresholds=AlgorithmThresholdsModel(msc_Nt=400, msc_exterior_fill=True),
        reconstruction_grid=GridSpecModel(nx=40, ny=40, nz=1, slice_thickness=4.0,
                                          origin=(-20.0, -20.0, -2.0)),
        use_cache=False,
    )


@pytest.fixture
def hullscan_home(tmp_path, monkeypatch) -> str:
    home = tmp_path / "home"
    monkeypatch.setenv("HULLSCAN_HOME", str(home))
    return str(home)
