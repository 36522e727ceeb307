import numpy as np
import pytest

from qbtrace.models import BoundaryOpSpec, ModelConfig, build, build_boundary_op, micro_model


@pytest.fixture
def micro():
    return micro_model()


def shipped_models():
    """Moderate-size instances of every model kind with two boundary operators each."""
    return [
        (
            ModelConfig("sl1d", N=40, coefficients={"a": lambda x: 1 + x**2, "a0": lambda x: 0.5 * x}),
            [BoundaryOpSpec("multiplication", beta=lambda x: 1 + x),
             BoundaryOpSpec("multiplication", beta=lambda x: 3 + np.cos(5 * x))],
        ),
        (
            ModelConfig("rect2d", Nx=7, Ny=6, length=1.0, width=0.8,
                        coefficients={"a11": lambda x, y: 1 + 0.5 * x * y, "a22": 1.5, "a0": 0.25}),
            [BoundaryOpSpec("multiplication", beta=lambda x, y: 1 + 0.5 * np.sin(3 * x + y)),
             BoundaryOpSpec("fourier_decay", s=1.0, amplitude=0.7)],
        ),
        (
            ModelConfig("disk_modes", n_r=24, mode_max=6),
            [BoundaryOpSpec("fourier_decay", s=1.0, shift=1.0),
             BoundaryOpSpec("multiplication", beta=lambda t: 1.5 + 0.5 * np.cos(t))],
        ),
    ]


def built(cfg, specs):
    tr = build(cfg)
    return tr, [build_boundary_op(s, tr, cfg) for s in specs]


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ------------------------------------------------- acceptance criterion lines

CRITERIA = []


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)``; printed at the end of the run."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
