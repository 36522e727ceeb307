import numpy as np
import pytest

from qbtrace import config
from qbtrace.errors import ConfigError
from qbtrace.models import build, build_boundary_op

from pathlib import Path

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_parse_complex():
    assert config.parse_complex("-5,2") == -5 + 2j
    assert config.parse_complex(" 3 ") == 3
    with pytest.raises(ConfigError):
        config.parse_complex("1,2,3")
    assert config.parse_lambda_list("-1,0; -5,2") == (-1, -5 + 2j)


def test_expression_evaluates():
    e = config.Expression("1 + 0.5*sin(pi*x)*y", ("x", "y"))
    assert e(0.5, 2.0) == pytest.approx(2.0)
    np.testing.assert_allclose(e(np.zeros(3), np.ones(3)), 1.0)


@pytest.mark.parametrize("text", [
    "__import__('os')",
    "x.real",
    "open('f')",
    "z + 1",
    "[1, 2]",
    "'a'",
    "sin(x, key=1)",
    "1 +",
])
def test_expression_rejects(text):
    with pytest.raises(ConfigError):
        config.Expression(text, ("x",))


def test_load_shipped_configs():
    for path in sorted(CONFIGS.glob("*.ini")):
        loaded = config.load(path)
        tr = build(loaded.model)
        for spec in loaded.boundary_ops:
            build_boundary_op(spec, tr, loaded.model)


def test_rect2d_config_coefficients():
    loaded = config.load(CONFIGS / "rect2d.ini")
    assert loaded.model.kind == "rect2d"
    assert any(isinstance(v, config.Expression) for v in loaded.model.coefficients.values())
    d = config.describe_model(loaded.model)
    assert d["dimension"] == 2 and d["kind"] == "rect2d"


def test_dense_matrix_roundtrip(tmp_path):
    b = np.array([[1.0, 2 - 1j], [2 + 1j, -0.125]])
    config.write_dense_matrix(tmp_path / "b.txt", b)
    np.testing.assert_array_equal(config.read_dense_matrix(tmp_path / "b.txt"), b)


def test_dense_matrix_malformed(tmp_path):
    (tmp_path / "b.txt").write_text("2 2\n1 0 2 0\n")
    with pytest.raises(ConfigError):
        config.read_dense_matrix(tmp_path / "b.txt")


@pytest.mark.parametrize("text", [
    "[geometry]\nN = 4\n",
    "[model]\nkind = torus\n",
    "[model]\nkind = sl1d\n[extra]\na = 1\n",
    "[model]\nkind = sl1d\n[geometry]\nfoo = 1\n",
    "[model]\nkind = sl1d\n[geometry]\nN = four\n",
    "[model]\nkind = sl1d\nlambda = a,b\n",
    "[model]\nkind = sl1d\n[boundary_op]\nvariant = dense\n",
    "[model]\nkind = sl1d\n[boundary_op]\nbeta = 1\ncolour = red\n",
    "[model]\nkind = sl1d\n[boundary_op2]\nbeta = 1\n",
    "[model]\nkind = sl1d\n[coefficients]\na = import os\n",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        config.loads(text)


def test_missing_file():
    with pytest.raises(ConfigError):
        config.load("/nonexistent/model.ini")


def test_diff_s_read():
    loaded = config.loads("[model]\nkind = disk_modes\n[boundary_op]\nvariant = fourier_decay\ns = 2\ndiff_s = 2\n")
    assert loaded.diff_s == 2.0 and loaded.boundary_ops[0].s == 2.0
