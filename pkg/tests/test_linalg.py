import numpy as np
import pytest
from hypothesis import given, strategies as st

from mols.errors import RankDeficiencyError
from mols.linalg import (
    IncrementalBasis,
    ProjectionState,
    basis_append,
    basis_for,
    ls_on_support,
    projected_column_norms,
)
from mols.problem import SensingMatrix, generate_gaussian_matrix


def explicit_projector_norms(A, support, cols):
    # independent oracle: P_perp = I - B B^+ built from the pseudoinverse
    B = A[:, support]
    P = np.eye(A.shape[0]) - (B @ np.linalg.pinv(B) if len(support) else 0)
    return np.linalg.norm(P @ A[:, cols], axis=0)


@given(st.integers(4, 30), st.integers(0, 10_000))
def test_incremental_qr_matches_numpy(m, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, m + 1))
    A = SensingMatrix(rng.standard_normal((m, m + 3)))
    supp = list(rng.choice(m + 3, size=k, replace=False))
    b = basis_for(A, supp)
    Q, R = b.Q, b.R
    assert np.allclose(Q.T @ Q, np.eye(k), atol=1e-10)
    assert np.allclose(Q @ R, A.entries[:, supp], atol=1e-10)
    Qn, Rn = np.linalg.qr(A.entries[:, supp])
    assert np.allclose(np.abs(np.diag(R)), np.abs(np.diag(Rn)), rtol=1e-8)


@given(st.integers(0, 10_000))
def test_ls_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    m, n = 20, 30
    A = SensingMatrix(rng.standard_normal((m, n)))
    y = rng.standard_normal(m)
    supp = list(rng.choice(n, size=int(rng.integers(1, 10)), replace=False))
    coef, res = ls_on_support(A, y, supp)
    B = A.entries[:, supp]
    ref = np.linalg.solve(B.T @ B, B.T @ y)  # Cholesky-free normal equations oracle
    assert np.allclose(coef, ref, rtol=1e-8, atol=1e-10)
    assert np.abs(B.T @ res).max() <= 1e-10 * np.linalg.norm(y)


def test_rank_deficiency_names_index():
    a = np.random.default_rng(0).standard_normal((5, 3))
    A = SensingMatrix(np.column_stack([a, a[:, 1]]))
    with pytest.raises(RankDeficiencyError) as ei:
        basis_for(A, [0, 1, 3])
    assert ei.value.index == 3
    with pytest.raises(RankDeficiencyError):
        ls_on_support(A, np.ones(5), [1, 3])


def test_basis_append_not_inplace_keeps_input():
    A = generate_gaussian_matrix(8, 12, 1)
    b = basis_for(A, [0, 1])
    b2 = basis_append(b, A, [5])
    assert b.cols == [0, 1] and b2.cols == [0, 1, 5]
    with pytest.raises(ValueError):
        basis_append(b, A, [1])


def test_basis_grows_past_capacity():
    A = generate_gaussian_matrix(10, 12, 2)
    b = IncrementalBasis(10, 1)
    basis_append(b, A, range(8), inplace=True)
    assert b.size == 8
    assert np.allclose(b.Q @ b.R, A.entries[:, :8])


@given(st.integers(0, 10_000))
def test_projected_norms_match_explicit_projector(seed):
    rng = np.random.default_rng(seed)
    A = generate_gaussian_matrix(12, 20, seed)
    supp = list(rng.choice(20, size=5, replace=False))
    rest = [i for i in range(20) if i not in supp]
    b = basis_for(A, supp)
    got = projected_column_norms(A, b, rest)
    assert np.allclose(got, explicit_projector_norms(A.entries, supp, rest), rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        projected_column_norms(A, b, supp[:1])


def test_projection_state_downdate_tracks_exact_values():
    A = generate_gaussian_matrix(16, 40, 5)
    y = np.random.default_rng(1).standard_normal(16)
    st_ = ProjectionState(A, y)
    chosen = []
    for step in ([3, 7], [11], [0, 1, 2], [30, 31, 32, 33]):
        st_.append(step)
        chosen += step
        pn = st_.projected_norms()
        rest = [i for i in range(40) if i not in chosen]
        assert np.allclose(pn[rest], explicit_projector_norms(A.entries, chosen, rest), rtol=1e-8, atol=1e-12)
        ref = y - A.entries[:, chosen] @ np.linalg.lstsq(A.entries[:, chosen], y, rcond=None)[0]
        assert np.allclose(st_.residual, ref, atol=1e-10)


def test_projected_norm_floor_for_spanned_column():
    A = SensingMatrix(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]) / np.array([1, 1, np.sqrt(2)]), normalized=True)
    st_ = ProjectionState(A, np.array([1.0, 2.0]))
    st_.append([0, 1])
    pn = st_.projected_norms()
    assert pn[2] == pytest.approx(1e-12)
