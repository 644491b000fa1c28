import csv
import io
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from hypdec.classes.enums import Surface, VerticalProfile
from hypdec.exporter import container, families, images, reports
from hypdec.field import FreqDensity, SpatialField
from hypdec.incidence import bush_family, full_shading
from hypdec.wavepacket import Tube


def test_density_container(random_density):
    f = FreqDensity(random_density.samples[:4, :6], Surface.ELLIPTIC, 4.0, VerticalProfile.BOX, (3, 5), 0.125)
    data = container.dump_density(f)
    assert data[:4] == container.MAGIC
    loaded = container.load(data)
    assert isinstance(loaded, FreqDensity)
    assert loaded.surface == Surface.ELLIPTIC
    assert loaded.profile == VerticalProfile.BOX
    assert loaded.thickness == 4.0
    assert loaded.offset == (3, 5)
    assert loaded.spacing == 0.125
    assert_array_equal(loaded.samples, f.samples.astype(np.complex64))


def test_field_container_file(tmp_path):
    F = SpatialField(np.arange(24).reshape(2, 3, 4) * (1 + 1j), 0.5, (1.0, -2.0, 0.5), 8.0)
    path = tmp_path / "field.hdc"
    container.save(path, F)
    loaded = container.read(path)
    assert isinstance(loaded, SpatialField)
    assert loaded.R == 8.0
    assert loaded.center == (1.0, -2.0, 0.5)
    assert_array_equal(loaded.samples, F.samples)


@pytest.mark.parametrize("data", [b"", b"XXXX" + bytes(64), container.dump_density(FreqDensity.ones(4))[:-3]])
def test_container_rejects_bad_bytes(data):
    with pytest.raises(ValueError):
        container.load(data)


def test_family_text_format(tmp_path):
    shading = full_shading(bush_family(1 / 8, 3))
    path = tmp_path / "bush.txt"
    families.save_family(path, shading)
    loaded = families.read_family(path)
    assert loaded.family.delta == 1 / 8
    np.testing.assert_allclose(loaded.family.directions, shading.family.directions)
    for a, b in zip(loaded.parameters, shading.parameters):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_family_allows_empty_shading():
    text = "# delta=0.25\n# comment\n\n0 0 0 ; 0 0 1 ;\n"
    shading = families.parse_family(io.StringIO(text))
    assert len(shading.family) == 1
    assert shading.parameters[0].size == 0


@pytest.mark.parametrize(
    "text",
    [
        "0 0 0 ; 0 0 1 ;\n",
        "# delta=0.25\n# delta=0.5\n",
        "# delta=abc\n",
        "# delta=0.25\n0 0 0 ; 0 0 1\n",
        "# delta=0.25\n0 0 ; 0 0 1 ;\n",
        "# delta=0.25\n0 0 x ; 0 0 1 ;\n",
        "# delta=0.25\n0 0 0 ; 0 0 1 ; 0.5 0 0\n",
        "# delta=2\n0 0 0 ; 0 0 1 ;\n",
    ],
)
def test_family_rejects_malformed_text(text):
    with pytest.raises(ValueError):
        families.parse_family(io.StringIO(text))


@pytest.mark.parametrize(
    ("value", "expected"),
    [(None, ""), (True, "true"), (0.1, "0.1"), (math.inf, "inf"), (-math.inf, "-inf"), (math.nan, "nan"), ((1, 2.5), "1 2.5"), ("x", "x")],
)
def test_format_value(value, expected):
    assert reports.format_value(value) == expected


def test_write_rows_orders_columns(tmp_path):
    path = tmp_path / "rows.csv"
    rows = [{"ratio": 0.5, "scenario": "s", "zeta": 1, "alpha": 2}, {"scenario": "s", "R": 16}]
    reports.write_rows(path, rows)
    with path.open(newline="") as f:
        header, first, second = list(csv.reader(f))
    assert header == list(reports.FIXED_COLUMNS) + ["alpha", "zeta"]
    assert first[header.index("ratio")] == "0.5"
    assert second[header.index("alpha")] == ""


def test_write_summary(tmp_path):
    path = tmp_path / "summary.json"
    reports.write_summary(path, {"b": math.inf, "a": (1, 2), "c": Surface.HYPERBOLIC, "d": np.float64(0.5)})
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1, 2], "b": "inf", "c": "hyperbolic", "d": 0.5}


def test_plot_growth_is_reproducible(tmp_path):
    series = {"random-phase": ([16, 32, 64], [1.0, 1.5, 2.0]), "empty": ([16], [0.0])}
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    reports.plot_growth(first, series, title="growth")
    reports.plot_growth(second, series, title="growth")
    assert first.read_bytes() == second.read_bytes()
    assert b"<svg" in first.read_bytes()


def test_write_tubes(tmp_path):
    tube = Tube((1, 2), (3, 4), (0.25, -0.25), (1.0, 2.0), (1.0, -0.25, 0.25), 6.0, 32.0)
    path = tmp_path / "tubes.csv"
    reports.write_tubes(path, [tube])
    with path.open(newline="") as f:
        header, row = list(csv.reader(f))
    assert tuple(header) == reports.TUBE_COLUMNS
    assert row == ["1", "2", "3", "4", "0.25", "-0.25", "1.0", "2.0", "1.0", "-0.25", "0.25", "6.0", "32.0"]


def test_slice_image():
    samples = np.zeros((3, 4, 5), dtype=np.complex128)
    samples[1, 2, 2] = 2j
    samples[0, 0, 2] = 1.0
    F = SpatialField(samples, 0.5)
    image = images.slice_image(F)
    assert image.size == (3, 4)
    pixels = np.asarray(image)
    assert pixels.max() == 255
    assert sorted(np.unique(pixels).tolist()) == [0, 128, 255]
    assert np.asarray(images.slice_image(F, axis=2, index=0)).max() == 0
    assert images.slice_image(F, size=16).size == (16, 16)


def test_slice_image_rejects_bad_plane(tmp_path):
    F = SpatialField(np.ones((2, 2, 2)), 0.5)
    with pytest.raises(ValueError):
        images.slice_image(F, axis=3)
    with pytest.raises(ValueError):
        images.slice_image(F, index=2)
    images.save_slice(tmp_path / "slice.png", F)
    assert (tmp_path / "slice.png").read_bytes()[:4] == b"\x89PNG"
