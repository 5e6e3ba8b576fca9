import numpy as np
import pytest

from wfovgeo import BoxScene, Equirectangular, KannalaBrandt, Pinhole


def pinhole_fov90(size=64):
    f = (size / 2.0) / np.tan(np.radians(45.0))
    return Pinhole(f, f, size / 2.0, size / 2.0, size, size)


def kb_fisheye(size=64, k1=-0.05, fov_deg=160.0):
    cam = KannalaBrandt(1.0, 1.0, size / 2.0, size / 2.0, k1, 0.0, 0.0, 0.0,
                        size, size, fov_deg)
    # rescale focal length so the declared FoV maps onto the image circle
    f = (size / 2.0) / cam.r_max
    return KannalaBrandt(f, f, size / 2.0, size / 2.0, k1, 0.0, 0.0, 0.0,
                         size, size, fov_deg)


def erp(height=64):
    return Equirectangular(2 * height, height)


@pytest.fixture
def box_scene():
    return BoxScene((4.0, 3.0, 5.0))


@pytest.fixture
def cube_scene():
    return BoxScene((2.0, 2.0, 2.0))
