"""Tests for the attribute classifiers."""

from dataclasses import replace

import pytest

from EmbodySim.environment.payloads import impact_payload, temperature_payload
from EmbodySim.errors import EncodingError
from EmbodySim.evaluation.classifiers import (
    AttributeClassifiers,
    default_classifiers,
    load_calibration,
)
from EmbodySim.scene.catalog import load_catalog
from EmbodySim.scene.model import SceneConfig
from EmbodySim.scene.sampler import sample_scene
from EmbodySim.sensors.acoustic import N_STRIKE_SITES, hit
from EmbodySim.sensors.tactile import N_TOUCH_SITES, touch
from EmbodySim.sensors.thermal import sample_temperature


@pytest.fixture(scope="module")
def catalog():
    return load_catalog()


@pytest.fixture(scope="module")
def classifiers():
    return default_classifiers()


@pytest.fixture(scope="module")
def template(catalog):
    return sample_scene(catalog, SceneConfig(), 77).objects[0]


class TestAcousticClassifier:
    """Material recovery from impact sounds."""

    def test_every_seeded_clip_classified(self, catalog, classifiers, template):
        """Test 500 seeded clips through the recorded WAV payload."""
        materials = catalog.materials
        wrong = []
        for i in range(500):
            material = materials[i % len(materials)]
            obj = replace(template, material=material, seed=1000 + i)
            clip = hit(obj, i % N_STRIKE_SITES, 1.0)
            record = impact_payload(obj, clip)
            predicted = classifiers.slot_value("material", record)
            if predicted != material.name:
                wrong.append((i, material.name, predicted))
        assert wrong == []

    def test_harder_strikes_keep_the_material(self, catalog, classifiers, template):
        """Test that the force scales loudness, not the classification."""
        steel = replace(template, material=catalog.material("steel"))
        for force in (0.2, 1.0, 5.0):
            assert classifiers.material(hit(steel, 3, force)) == "steel"


class TestTactileAndThermal:
    """Hardness and temperature recovery."""

    def test_hardness_word_per_material(self, catalog, classifiers, template):
        """Test that every touch site yields the material's hardness word."""
        for material in catalog.materials:
            obj = replace(template, material=material)
            for site in range(N_TOUCH_SITES):
                reading = touch(obj, site, 1.5)
                assert classifiers.hardness_word(reading) == material.hardness_word

    @pytest.mark.parametrize("label", ["hot", "cold", "room"])
    def test_temperature_label(self, catalog, classifiers, label):
        """Test that sampled readings map back to their label."""
        for seed in range(100):
            celsius = sample_temperature(label, seed, catalog).celsius
            assert classifiers.temperature_label(celsius) == label

    def test_wrong_payload_for_slot(self, classifiers, template):
        """Test that a slot cannot be filled from an unrelated payload."""
        with pytest.raises(EncodingError):
            classifiers.slot_value("material", temperature_payload(template, 20.0))

    def test_attribute_values(self, classifiers, template):
        """Test recovered attribute values for the policies."""
        record = temperature_payload(template, 80.0)
        assert classifiers.attribute_value("temp_label", record) == "hot"
        with pytest.raises(ValueError):
            classifiers.attribute_value("colour", record)


class TestCalibration:
    """Test cases for the calibration file."""

    def test_thresholds_separate_ranges(self, catalog):
        """Test that the thresholds fall between the label ranges."""
        calibration = load_calibration()
        assert catalog.temp_range("cold")[1] < calibration.cold_below
        assert calibration.cold_below < catalog.temp_range("room")[0]
        assert catalog.temp_range("room")[1] < calibration.hot_above
        assert calibration.hot_above < catalog.temp_range("hot")[0]

    def test_model_is_cached_per_catalog(self, catalog):
        """Test that classifiers built on the same catalog share one fitted model."""
        a = AttributeClassifiers(catalog).acoustic
        b = AttributeClassifiers(catalog).acoustic
        assert a is b
        assert a.materials == tuple(m.name for m in catalog.materials)
