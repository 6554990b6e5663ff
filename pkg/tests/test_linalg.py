import numpy as np
import pytest

from gridcert.linalg import (BlockStructureError, SingularMatrixError,
                             assemble_jstar, inf_norm_mat, inf_norm_vec,
                             invert_dense)


def rand_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_inf_norm_vec_trivial():
    assert inf_norm_vec([0, 0, 0]) == 0.0
    assert inf_norm_vec([3 + 4j, 1]) == pytest.approx(5.0)
    assert inf_norm_vec([]) == 0.0


def test_inf_norm_mat_trivial():
    assert inf_norm_mat(np.eye(7)) == 1.0
    assert inf_norm_mat([[1, -1], [0, 2j]]) == pytest.approx(2.0)


def test_inf_norms_match_bruteforce_scan():
    rng = np.random.default_rng(0)
    for _ in range(25):
        v = rand_complex(rng, 12)
        assert inf_norm_vec(v) == pytest.approx(
            max(abs(x) for x in v), rel=1e-15)
        a = rand_complex(rng, 9, 9)
        brute = max(sum(abs(a[i, j]) for j in range(9)) for i in range(9))
        assert inf_norm_mat(a) == pytest.approx(brute, rel=1e-15)


def test_inf_norm_submultiplicative_on_random_pairs():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rand_complex(rng, 8, 8)
        b = rand_complex(rng, 8, 8)
        assert inf_norm_mat(a @ b) <= inf_norm_mat(a) * inf_norm_mat(b) * (1 + 1e-12)


def test_invert_identity():
    inv, cond = invert_dense(np.eye(5))
    assert np.allclose(inv, np.eye(5))
    assert cond == pytest.approx(1.0)


def test_invert_diagonal():
    inv, _ = invert_dense(np.diag([2.0, 4.0j]))
    assert np.allclose(np.diag(inv), [0.5, -0.25j])


def test_invert_random_residual():
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = rand_complex(rng, 20, 20) + 5.0 * np.eye(20)
        inv, cond = invert_dense(a)
        assert inf_norm_mat(a @ inv - np.eye(20)) <= 1e-9 * 20
        assert cond >= 1.0


def test_invert_singular_reports_pivot():
    a = np.array([[1.0, 2.0], [2.0, 4.0]], dtype=complex)
    with pytest.raises(SingularMatrixError) as err:
        invert_dense(a)
    assert err.value.pivot_index is not None


def test_invert_rejects_nonsquare_and_nonfinite():
    with pytest.raises(ValueError):
        invert_dense(np.ones((2, 3)))
    with pytest.raises(ValueError):
        invert_dense(np.array([[np.nan, 0], [0, 1]]))


def test_jstar_zero_loading():
    blocks = assemble_jstar(np.array([[0.03 - 0.04j]]), np.zeros(1, complex))
    assert np.allclose(blocks.M, np.eye(1))
    assert np.allclose(blocks.N, np.zeros((1, 1)))
    assert blocks.inv_jstar_norm == pytest.approx(1.0)


def test_jstar_scalar_hand_inverse():
    # J = [[1, conj(z s)], [z s, 1]] inverts by hand for |z s| < 1.
    z, s = 0.2 - 0.3j, 0.8 + 0.5j
    blocks = assemble_jstar(np.array([[z]]), np.array([s]))
    zs = z * s
    m_expect = 1.0 / (1.0 - np.conj(zs) * zs)
    assert blocks.M[0, 0] == pytest.approx(m_expect)
    assert blocks.N[0, 0] == pytest.approx(-np.conj(zs) * m_expect)


def test_jstar_random_reconstruction():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(2, 12))
        z = rand_complex(rng, n, n)
        s = rand_complex(rng, n)
        scale = inf_norm_mat(z * s[np.newaxis, :])
        z /= 2.5 * scale  # keep ||Z diag(s)|| < 1 so J is nonsingular
        blocks = assemble_jstar(z, s)
        zs = z * s[np.newaxis, :]
        j = np.block([[np.eye(n), np.conj(zs)], [zs, np.eye(n)]])
        inv = np.block([[blocks.M, blocks.N],
                        [np.conj(blocks.N), np.conj(blocks.M)]])
        assert inf_norm_mat(j @ inv - np.eye(2 * n)) <= 1e-9 * n
        assert blocks.inv_jstar_norm == pytest.approx(inf_norm_mat(inv))


def test_jstar_validity_limit_is_an_error():
    # |z s| -> 1 makes J singular: must surface as an error, never a result.
    with pytest.raises((SingularMatrixError, BlockStructureError)):
        assemble_jstar(np.array([[1.0 + 0j]]), np.array([1.0 - 1e-16 + 0j]))


def test_jstar_structure_guard_aborts_on_corrupt_inverse(monkeypatch):
    import gridcert.linalg as gl

    true_invert = gl.invert_dense

    def corrupt(a):
        inv, cond = true_invert(a)
        out = inv.copy()
        out[-1, 0] += 1e-3
        return out, cond

    monkeypatch.setattr(gl, "invert_dense", corrupt)
    with pytest.raises(BlockStructureError):
        gl.assemble_jstar(np.array([[0.2 - 0.1j]]), np.array([0.5 + 0.2j]))


def test_jstar_dimension_mismatch():
    with pytest.raises(ValueError):
        assemble_jstar(np.eye(2), np.zeros(3, complex))
