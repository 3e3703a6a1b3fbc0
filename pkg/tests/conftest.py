import numpy as np
import pytest

from mcma import Frame


def smooth_texture(height, width, seed, cutoff=0.002):
    """Periodic band-limited texture in [0, 255]; circular shifts of it are
    exact translations, which makes the shift oracle trivial."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, 1.0, (height, width))
    fy = np.fft.fftfreq(height) * height
    fx = np.fft.fftfreq(width) * width
    lowpass = np.exp(-cutoff * np.add.outer(fy ** 2, fx ** 2))
    tex = np.real(np.fft.ifft2(np.fft.fft2(noise) * lowpass))
    tex = (tex - tex.min()) / (tex.max() - tex.min())
    return np.rint(tex * 255.0).astype(np.uint8)


def shifted_pair(height, width, seed, dx, dy):
    """(prev, curr) gray frames where curr is prev circularly shifted by
    (dx, dy) pixels; ground-truth backward flow is (-dx, -dy)."""
    base = smooth_texture(height, width, seed)
    prev = Frame(base[:, :, None])
    curr = Frame(np.roll(base, (dy, dx), axis=(0, 1))[:, :, None], index=1)
    return prev, curr


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
