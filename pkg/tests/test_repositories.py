import json

import numpy as np
import pytest

from ctxnet.core.base_repository import (
    ArrayRepository,
    ManifestRepository,
    ModelRepository,
    PanelRepository,
    file_digest,
)
from ctxnet.core.exceptions import DataFormatError, NotFoundError, ValidationError
from ctxnet.core.tensors import PanelKind


@pytest.fixture
def panels():
    return PanelRepository()


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestPanelRepository:
    def test_round_trip(self, panels, ln_panel, tmp_path):
        path = panels.save(ln_panel, tmp_path / "panel.csv")
        loaded = panels.load(path, M=3)
        assert loaded.kind == PanelKind.COMPOSITIONAL
        assert np.allclose(loaded.data, ln_panel.data[: loaded.T + 1], rtol=0, atol=1e-15)

    def test_categorical_kind_is_inferred(self, panels, tiny_categorical, tmp_path):
        path = panels.save(tiny_categorical, tmp_path / "tiny.csv")
        loaded = panels.load(path)
        assert loaded.kind == PanelKind.CATEGORICAL
        assert np.array_equal(loaded.data, tiny_categorical.data)

    def test_missing_rows_are_zero(self, panels, tmp_path):
        path = write(tmp_path, "p.csv", "t,node,x_1,x_2\n0,0,1,0\n3,1,0,1\n")
        data = panels.load_array(path)
        assert data.shape == (4, 2, 2)
        assert not data[1:3].any()

    def test_explicit_horizon(self, panels, tmp_path):
        path = write(tmp_path, "p.csv", "t,node,x_1\n1,0,1\n")
        assert panels.load_array(path, T=5, M=3).shape == (6, 3, 1)
        with pytest.raises(ValidationError):
            panels.load_array(path, T=0)

    @pytest.mark.parametrize("text", [
        "time,node,x_1\n0,0,1\n",
        "t,node,x_2\n0,0,1\n",
        "t,node,x_1\n0,0,1\n0,0,1\n",
        "t,node,x_1\n0.5,0,1\n",
        "t,node,x_1\n0,-1,1\n",
    ])
    def test_format_errors(self, panels, tmp_path, text):
        with pytest.raises(DataFormatError):
            panels.load_array(write(tmp_path, "bad.csv", text))

    def test_missing_file(self, panels, tmp_path):
        with pytest.raises(NotFoundError):
            panels.load(tmp_path / "nope.csv")

    def test_invalid_rows_are_rejected_on_load(self, panels, tmp_path):
        path = write(tmp_path, "p.csv", "t,node,x_1,x_2\n0,0,1,1\n")
        with pytest.raises(ValidationError):
            panels.load(path, kind=PanelKind.CATEGORICAL)


class TestModelRepository:
    def test_multinomial_round_trip(self, mn_model, tmp_path):
        models = ModelRepository()
        loaded = models.load_model(models.save_model(mn_model, tmp_path / "m.json"))
        assert np.array_equal(loaded.A.data, mn_model.A.data)
        assert np.array_equal(loaded.nu, mn_model.nu)

    def test_dynamic_model_round_trip(self, ln_model, tmp_path):
        models = ModelRepository()
        loaded = models.load_model(models.save_model(ln_model, tmp_path / "m.json"))
        assert np.array_equal(loaded.occurrence.B.data, ln_model.occurrence.B.data)
        assert np.array_equal(loaded.Sigma, ln_model.Sigma)

    def test_inconsistent_lengths(self, mn_model, tmp_path):
        models = ModelRepository()
        path = models.save_model(mn_model, tmp_path / "m.json")
        doc = json.loads(path.read_text())
        doc["A"] = doc["A"][:-1]
        path.write_text(json.dumps(doc))
        with pytest.raises(ValidationError):
            models.load_model(path)

    def test_schema_errors(self, tmp_path):
        with pytest.raises(DataFormatError):
            ModelRepository().load(write(tmp_path, "m.json", '{"kind": "hawkes"}'))


class TestArrayRepository:
    def test_plain_and_keyed(self, tmp_path):
        arrays = ArrayRepository()
        assert arrays.load(write(tmp_path, "a.json", "[[1, 2], [3, 4]]")).shape == (2, 2)
        assert arrays.load(write(tmp_path, "b.json", '{"nu": [1, 2]}'), key="nu").tolist() == [1.0, 2.0]

    def test_missing_key(self, tmp_path):
        with pytest.raises(DataFormatError):
            ArrayRepository().load(write(tmp_path, "b.json", '{"eta": [1]}'), key="nu")


def test_manifest_records_digests(tmp_path):
    source = write(tmp_path, "in.csv", "t,node,x_1\n0,0,1\n")
    path = ManifestRepository().record(
        tmp_path / "run.manifest.json", command="ctxnet validate", config={"a": 1}, seed=3,
        inputs=[source, tmp_path / "missing.csv"], outputs=[], wall_time=0.5,
    )
    manifest = ManifestRepository().load(path)
    assert manifest.inputs == {str(source): file_digest(source)}
    assert manifest.seed == 3
    assert "numpy" in manifest.versions


def test_validate_panel_reports_without_raising(tmp_path):
    path = write(tmp_path, "p.csv", "t,node,x_1,x_2\n0,0,1,1\n2,1,0,1\n")
    report = PanelRepository().validate_panel(path, kind=PanelKind.CATEGORICAL)
    assert not report.ok
    assert (report.T, report.M, report.K) == (2, 2, 2)
    assert [(v.t, v.node) for v in report.violations] == [(0, 0)]
    assert report.event_frequencies == [0.0, 0.5]
