import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from periocular.imagecore import GrayImage

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@st.composite
def gray_images(draw, min_side=1, max_side=12):
    w = draw(st.integers(min_side, max_side))
    h = draw(st.integers(min_side, max_side))
    seed = draw(st.integers(0, 2**32 - 1))
    data = np.random.default_rng(seed).integers(0, 256, size=(h, w), dtype=np.uint8)
    return GrayImage(w, h, data)


def random_image(rng, w=120, h=160, lo=0, hi=256):
    return GrayImage(w, h, rng.integers(lo, hi, size=(h, w), dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
