import numpy as np
import pytest

from textriage.fixtures import canned_document
from textriage.imaging import ImageBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def invoice_doc():
    return canned_document("invoice")


@pytest.fixture
def blank_page():
    return ImageBuffer(np.full((120, 160), 255, dtype=np.uint8))


def random_image(rng, max_side=256, channels=1):
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    shape = (h, w) if channels == 1 else (h, w, 3)
    return ImageBuffer(rng.integers(0, 256, size=shape, dtype=np.uint8))
