import numpy as np
import pytest

from lensless_crb import (
    Diffuser,
    Lenslets,
    PlacementError,
    PsfSpec,
    Rml,
    default_study_specs,
    generate_psf,
    multiplexing_index,
)


def local_maxima(grid):
    """Strict 8-neighbor local maxima as (row, col) pairs."""
    h, w = grid.shape
    out = []
    for r in range(h):
        for c in range(w):
            v = grid[r, c]
            neigh = grid[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2]
            if v == neigh.max() and np.count_nonzero(neigh == v) == 1:
                out.append((r, c))
    return out


class TestLenslets:
    def test_single_lens_centered(self):
        p = generate_psf(PsfSpec(Lenslets(1), (32, 32), 0))
        assert np.unravel_index(np.argmax(p), p.shape) == (16, 16)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_two_lens_positions(self):
        p = generate_psf(PsfSpec(Lenslets(2), (32, 32), 0))
        peaks = {m for m in local_maxima(p) if p[m] > 0.5 * p.max()}
        assert peaks == {(16, 8), (16, 24)}

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_spot_count(self, n):
        p = generate_psf(PsfSpec(Lenslets(n), (32, 32), 0))
        peaks = [m for m in local_maxima(p) if p[m] > 0.5 * p.max()]
        assert len(peaks) == n

    def test_small_grid_rejected_for_multi_spot(self):
        with pytest.raises(Exception):
            generate_psf(PsfSpec(Lenslets(3), (4, 4), 0))


class TestRml:
    def test_deterministic(self):
        a = generate_psf(PsfSpec(Rml(), (32, 32), 9))
        b = generate_psf(PsfSpec(Rml(), (32, 32), 9))
        np.testing.assert_array_equal(a, b)

    def test_placement_budget_exhausted(self):
        with pytest.raises(PlacementError):
            generate_psf(PsfSpec(Rml(n_spots=40), (8, 8), 0))


class TestDiffuser:
    def test_high_multiplexing_occupancy(self):
        p = generate_psf(PsfSpec(Diffuser(correlation_length=3, contrast=2),
                                 (32, 32), 42))
        occupancy = np.mean(p > 0.1 * p.max())
        assert occupancy >= 0.30

    def test_deterministic(self):
        spec = PsfSpec(Diffuser(), (32, 32), 7)
        np.testing.assert_array_equal(generate_psf(spec), generate_psf(spec))


class TestNormalization:
    @pytest.mark.parametrize("name", list(default_study_specs()))
    def test_unit_mass(self, name):
        p = generate_psf(default_study_specs(seed=11)[name])
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p >= 0)


class TestMultiplexingIndex:
    def test_delta(self):
        p = np.zeros((32, 32))
        p[3, 5] = 1.0
        assert multiplexing_index(p) == pytest.approx(1 / 1024)

    def test_uniform(self):
        assert multiplexing_index(np.ones((32, 32))) == pytest.approx(1.0)

    def test_scale_invariance(self):
        p = generate_psf(PsfSpec(Lenslets(4), (32, 32), 0))
        assert multiplexing_index(p) == pytest.approx(multiplexing_index(17.3 * p),
                                                      rel=1e-12)

    def test_ordering_by_multiplexing(self):
        specs = default_study_specs(seed=42)
        i1 = multiplexing_index(generate_psf(specs["lenslets1"]))
        i5 = multiplexing_index(generate_psf(specs["lenslets5"]))
        idiff = multiplexing_index(generate_psf(specs["diffuser"]))
        assert i1 < i5 < idiff

    def test_zero_psf_rejected(self):
        with pytest.raises(ValueError):
            multiplexing_index(np.zeros((4, 4)))
