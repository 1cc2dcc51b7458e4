"""
Shared fixtures.
"""

import numpy as np
import pytest

from flipblur.lib.psf_symbol import Psf, PsfKind, load_psf, make_psf


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def skewed_psf() -> Psf:
    """
    The nonsymmetric three-tap PSF (0.2, 0.5, 0.3).
    """
    return load_psf("0.2 0.5 0.3")


@pytest.fixture
def binomial_psf() -> Psf:
    """
    The symmetric three-tap PSF (0.25, 0.5, 0.25).
    """
    return load_psf("0.25 0.5 0.25")


@pytest.fixture
def identity_psf() -> Psf:
    return load_psf("1")


@pytest.fixture
def speckle_psf() -> Psf:
    """
    A fixed nonsymmetric 2D test PSF.
    """
    return make_psf(PsfKind.SPECKLE, 2, dims=2, seed=11)


def random_psf(rng: np.random.Generator, m: int, dims: int) -> Psf:
    shape = (1, 2 * m + 1) if dims == 1 else (2 * m + 1, 2 * m + 1)
    return Psf.from_array(rng.random(shape) + 0.05, dims=dims)
