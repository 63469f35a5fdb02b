import pytest

from dool import config
from dool.errors import ConfigurationError


@pytest.mark.parametrize("name", config.preset_names())
def test_every_preset_validates_both_scales(name):
    doc = config.load(name)
    scaled = config.load(name, paper_scale=True)
    assert "paper_scale" not in doc and "paper_scale" not in scaled
    if "model" in doc:
        tc = config.train_config_of(doc)
        assert tc.epochs == doc["training"]["epochs"]
        assert config.train_config_of(scaled).epochs >= tc.epochs
    if "dlam" in doc:
        assert config.dlam_config_of(doc).epochs == doc["dlam"]["epochs"]


def test_unknown_field_reports_path(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(config.preset_text("heat").replace("lr: 0.0005", "lr: 0.0005, momentum: 1"))
    with pytest.raises(ConfigurationError, match="training"):
        config.load(p)


def test_reversed_interval():
    with pytest.raises(ConfigurationError, match="inversion.interval"):
        config.load("inversion", overrides={"inversion": {"interval": [0.1, 0.0]}})


def test_overrides_and_band_limit():
    doc = config.load("ch1d", overrides={"seed": 5, "training": {"epochs": 7}})
    assert doc["seed"] == 5 and config.train_config_of(doc).epochs == 7
    assert config.band_limit_of(doc, config.basis_of(doc)) == 2
    fp = config.load("fp")
    assert config.band_limit_of(fp, config.basis_of(fp)) is None


def test_missing_file():
    with pytest.raises(ConfigurationError):
        config.load("no/such/file.yaml")


def test_sampling_centres_parse():
    doc = config.load("multi_input")
    tc = config.train_config_of(doc)
    assert tc.sampling.centers[1] == pytest.approx(-0.125j)
