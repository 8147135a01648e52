from __future__ import annotations

import numpy as np
import pytest

from pptem.noise import coarsen, coarsen_values, generate_increments, increment_block, standard_normals


def test_deterministic():
    a = generate_increments(7, 3, 100, 2, 0.01)
    b = generate_increments(7, 3, 100, 2, 0.01)
    assert a.values.tobytes() == b.values.tobytes()


def test_paths_uncorrelated():
    a = standard_normals(11, 0, 100_000)
    b = standard_normals(11, 1, 100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_variance_matches_delta():
    g = generate_increments(5, 0, 1_000_000, 1, 0.01)
    assert g.values.var() == pytest.approx(0.01, rel=0.01)
    assert abs(g.values.mean()) < 4 * 0.1 / 1000


def test_seed_changes_stream():
    assert not np.array_equal(standard_normals(1, 0, 10), standard_normals(2, 0, 10))


def test_large_seed_reduced_mod_2_64():
    big = (1 << 64) + 5
    np.testing.assert_array_equal(standard_normals(big, 0, 8), standard_normals(5, 0, 8))


def test_block_matches_single_paths():
    blk = increment_block(3, [4, 9], 16, 2, 0.25)
    np.testing.assert_array_equal(blk[1], generate_increments(3, 9, 16, 2, 0.25).values)


def test_block_independent_of_partition():
    whole = increment_block(3, range(6), 8, 1, 0.5)
    parts = np.concatenate([increment_block(3, range(0, 4), 8, 1, 0.5), increment_block(3, range(4, 6), 8, 1, 0.5)])
    assert whole.tobytes() == parts.tobytes()


def test_coarsen_telescopes():
    g = generate_increments(1, 0, 4, 1, 0.25)
    c = coarsen(g, 4)
    assert c.values.shape == (1, 1)
    assert c.values[0, 0] == pytest.approx(g.values.sum(), abs=1e-15)
    assert c.delta == 1.0


def test_coarsen_associative():
    g = generate_increments(2, 1, 64, 3, 2.0**-6)
    np.testing.assert_allclose(coarsen(coarsen(g, 2), 2).values, coarsen(g, 4).values, atol=1e-12)


def test_brownian_path_preserved_at_shared_times():
    g = generate_increments(2, 1, 64, 1, 2.0**-6)
    fine = g.brownian_path()
    coarse = coarsen(g, 8).brownian_path()
    np.testing.assert_allclose(coarse, fine[::8], atol=1e-12)


@pytest.mark.parametrize("factor", [1, 3])
def test_coarsen_rejects(factor):
    with pytest.raises(ValueError):
        coarsen_values(np.zeros((8, 1)), factor)


def test_generate_rejects_bad_args():
    with pytest.raises(ValueError):
        generate_increments(0, 0, 0, 1, 0.1)
    with pytest.raises(ValueError):
        generate_increments(0, 0, 4, 1, 0.0)
    with pytest.raises(ValueError):
        standard_normals(0, -1, 4)
