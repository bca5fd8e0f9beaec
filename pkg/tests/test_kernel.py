import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from pnka.data import RepresentationMatrix
from pnka.errors import DataError, ShapeError, StateError, UnsupportedError
from pnka.kernel import (
    KernelSpec,
    center_columns,
    gram_rows,
    iter_blocks,
    kernel_rows,
    map_blocks,
    resolve_threads,
    row_alignment,
    row_norms,
)


def _ordered_reference(x, rows):
    """Ascending-feature accumulation in plain numpy: the order the kernel promises."""
    out = np.zeros((len(rows), x.shape[0]))
    for k in range(x.shape[1]):
        out += np.multiply.outer(x[rows, k], x[:, k])
    return out


def test_center_columns_zero_means(rng):
    m = center_columns(rng.standard_normal((50, 7)) + 100.0)
    assert m.centered
    assert np.abs(m.data.mean(axis=0)).max() < 1e-12


def test_center_columns_constant_column_exact_zero():
    x = np.array([[0.1, 1.0], [0.1, 2.0], [0.1, 4.0]])
    m = center_columns(x)
    assert np.all(m.data[:, 0] == 0.0)


def test_centered_flag_is_audited():
    with pytest.raises(DataError, match="centered"):
        RepresentationMatrix(np.array([[1.0], [2.0]]), centered=True)
    RepresentationMatrix(np.array([[1.0], [-1.0]]), centered=True)


def test_kernel_rows_examples():
    m = center_columns(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    blk = kernel_rows(m, 0, 2)
    assert_array_equal(blk.rows, [[1.0, -1.0], [-1.0, 1.0]])
    assert_allclose(blk.row_norms, [np.sqrt(2)] * 2, rtol=1e-10)
    assert blk.stop_row == 2


def test_kernel_rows_match_full_gram(rng):
    x = rng.standard_normal((40, 6))
    m = center_columns(x)
    full = m.data @ m.data.T
    blk = kernel_rows(m, 10, 13)
    assert_allclose(blk.rows, full[10:23], rtol=0, atol=1e-12)
    assert_allclose(blk.row_norms, np.linalg.norm(full[10:23], axis=1), rtol=1e-10)


def test_kernel_rows_errors(rng):
    x = rng.standard_normal((5, 2))
    with pytest.raises(StateError):
        kernel_rows(x, 0, 2)
    m = center_columns(x)
    with pytest.raises(ShapeError):
        kernel_rows(m, 4, 2)
    with pytest.raises(ShapeError):
        kernel_rows(m, 0, 0)
    with pytest.raises(UnsupportedError):
        kernel_rows(m, 0, 2, spec="rbf")
    assert KernelSpec.parse("LINEAR") is KernelSpec.LINEAR


def test_kernel_symmetry_is_exact(rng):
    m = center_columns(rng.standard_normal((30, 9)))
    k = gram_rows(m, np.arange(30))
    assert_array_equal(k, k.T)


def test_ordered_backend_matches_numpy_ordered_sum(rng):
    m = center_columns(rng.standard_normal((37, 11)))
    rows = np.array([0, 5, 36, 12, 3])
    assert gram_rows(m, rows).tobytes() == _ordered_reference(m.data, rows).tobytes()


@pytest.mark.parametrize("block", [1, 3, 4, 7, 64, 100])
def test_rows_bitwise_independent_of_block(rng, block):
    m = center_columns(rng.standard_normal((100, 33)))
    whole = gram_rows(m, np.arange(100))
    parts = np.vstack([gram_rows(m, np.arange(s, e)) for s, e in iter_blocks(100, block)])
    assert parts.tobytes() == whole.tobytes()


def test_blas_backend_close_to_ordered(rng):
    m = center_columns(rng.standard_normal((50, 20)))
    a = gram_rows(m, np.arange(50))
    b = gram_rows(m, np.arange(50), backend="blas")
    assert_allclose(a, b, rtol=0, atol=1e-12)
    with pytest.raises(UnsupportedError):
        gram_rows(m, np.arange(2), backend="gpu")


def test_rotation_and_scaling_act_on_kernel(rng):
    x = rng.standard_normal((20, 5))
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    k = gram_rows(center_columns(x), np.arange(20))
    kq = gram_rows(center_columns(x @ q), np.arange(20))
    ks = gram_rows(center_columns(3.0 * x), np.arange(20))
    assert_allclose(kq, k, atol=1e-12)
    assert_allclose(ks, 9.0 * k, rtol=1e-12, atol=1e-12)


def test_row_helpers(rng):
    a = rng.standard_normal((4, 6))
    c = rng.standard_normal((4, 6))
    assert_allclose(row_norms(a), np.linalg.norm(a, axis=1), rtol=1e-14)
    dots, sa, sc = row_alignment(a, c)
    assert_allclose(dots, np.einsum("ij,ij->i", a, c), rtol=1e-13)
    assert_allclose(sa, (a * a).sum(1), rtol=1e-14)
    assert_allclose(sc, (c * c).sum(1), rtol=1e-14)
    with pytest.raises(ShapeError):
        row_alignment(a, c[:, :3])


def test_threads_resolution(monkeypatch):
    monkeypatch.delenv("PNKA_THREADS", raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv("PNKA_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("PNKA_THREADS", "many")
    with pytest.raises(ShapeError):
        resolve_threads(None)
    with pytest.raises(ShapeError):
        resolve_threads(0)


def test_map_blocks_keeps_order():
    assert map_blocks(lambda v: v * v, list(range(10)), threads=4) == [v * v for v in range(10)]


def test_iter_blocks_cover():
    assert list(iter_blocks(10, 4)) == [(0, 4), (4, 8), (8, 10)]
    with pytest.raises(ShapeError):
        list(iter_blocks(3, 0))
