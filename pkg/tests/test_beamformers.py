import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capa import (
    Scenario,
    User,
    mmse,
    mrt,
    optimal_structure,
    random_scenario,
    received_amplitudes,
    slnr,
    transmit_power,
    verify_operator_inverse,
    zf,
)
from capa.beamformers import operator_inverse_matrix, unit_power_columns
from capa.errors import DomainError, IllConditionedError

from conftest import gram, on_axis


def column_angles(A, B, Q):
    """Angle between matching columns under the ``Q`` inner product."""
    inner = np.abs(np.einsum("ik,ij,jk->k", A.conj(), Q, B))
    na = np.sqrt(np.real(np.einsum("ik,ij,jk->k", A.conj(), Q, A)))
    nb = np.sqrt(np.real(np.einsum("ik,ij,jk->k", B.conj(), Q, B)))
    return np.arccos(np.clip(inner / (na * nb), 0.0, 1.0))


def column_powers(Q, A):
    return np.real(np.einsum("ik,ij,jk->k", A.conj(), Q, A))


# -- MRT -------------------------------------------------------------------------


def test_mrt_single_user_alignment():
    scenario = on_axis()
    Q, _, _ = gram(scenario)
    P = scenario.power_budget
    a = mrt(Q, P)
    assert a[0, 0] == pytest.approx(np.sqrt(P / Q[0, 0].real), rel=1e-12)
    received = np.abs(Q @ a) ** 2
    # Cauchy-Schwarz bound |<h, w>|^2 <= |h|^2 |w|^2 holds with equality
    assert received[0, 0] == pytest.approx(Q[0, 0].real * P, rel=1e-12)


def test_mrt_received_amplitude(four_users):
    _, Q, grid, samples = four_users
    p = np.array([1.0, 2.0, 3.0, 4.0]) * 1e-4
    A = mrt(Q, p)
    H = samples.values
    M = (H.conj() * grid.weights[:, None]).T @ (H @ A)
    assert np.allclose(np.abs(np.diag(M)), np.sqrt(p * np.real(np.diag(Q))), rtol=1e-10)
    assert np.allclose(column_powers(Q, A), p, rtol=1e-12)


def test_mrt_equals_zf_for_orthogonal_users():
    Q = np.diag([2.0, 5.0, 0.5]).astype(complex)
    p = np.array([0.3, 0.2, 0.5])
    assert np.allclose(mrt(Q, p), zf(Q, p), rtol=1e-12)


def test_mrt_degenerate_channel():
    with pytest.raises(DomainError):
        mrt(np.diag([1.0, 0.0]).astype(complex), 1.0)


def test_mrt_cauchy_schwarz(four_users, rng):
    _, Q, _, _ = four_users
    A = mrt(Q, 1.0)
    signal = np.abs(np.diag(Q @ A)) ** 2
    bound = np.real(np.diag(Q)) * column_powers(Q, A)
    assert np.allclose(signal, bound, rtol=1e-12)
    B = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    signal = np.abs(np.diag(Q @ B)) ** 2
    assert np.all(signal < np.real(np.diag(Q)) * column_powers(Q, B))


# -- ZF ----------------------------------------------------------------------------


def test_zf_nulls_interference(four_users):
    _, Q, _, _ = four_users
    M = received_amplitudes(Q, zf(Q, 1e-3 / 4))
    off = M - np.diag(np.diag(M))
    assert np.abs(off).max() < 1e-10 * np.abs(M).max()


def test_zf_single_user_is_mrt():
    Q, _, _ = gram(on_axis())
    assert np.allclose(zf(Q, 1e-3), mrt(Q, 1e-3), rtol=1e-12)


def test_zf_duplicated_user_raises():
    user = User((1.0, 1.0, 20.0))
    Q, _, _ = gram(Scenario(users=(user, user)))
    with pytest.raises(IllConditionedError) as info:
        zf(Q, 1e-3)
    assert info.value.condition_number > 1e12
    assert "condition number" in str(info.value)


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 4))
def test_zf_null_property(seed, k):
    Q, _, _ = gram(random_scenario(seed, k), 8)
    M = received_amplitudes(Q, zf(Q, 1.0))
    ratio = np.abs(M) / np.abs(np.diag(M))[:, None]
    np.fill_diagonal(ratio, 0.0)
    assert ratio.max() < 1e-8


# -- MMSE ---------------------------------------------------------------------------


def test_mmse_high_noise_limit(four_users):
    scenario, Q, _, _ = four_users
    # the angle shrinks like P |Q| / (K sigma^2), about 3e-7 at this scale
    A = mmse(Q, scenario.power_budget, scenario.noise_power * 1e8, 1.0)
    assert column_angles(A, mrt(Q, 1.0), Q).max() < 1e-6


def test_mmse_low_noise_limit(four_users):
    scenario, Q, _, _ = four_users
    A = mmse(Q, scenario.power_budget, scenario.noise_power * 1e-6, 1.0)
    assert column_angles(A, zf(Q, 1.0), Q).max() < 1e-6


def test_mmse_limits_monotone(four_users):
    scenario, Q, _, _ = four_users
    scales = 10.0 ** np.arange(-6, 7)
    to_mrt = [column_angles(mmse(Q, scenario.power_budget, scenario.noise_power * s, 1.0), mrt(Q, 1.0), Q).max() for s in scales]
    to_zf = [column_angles(mmse(Q, scenario.power_budget, scenario.noise_power * s, 1.0), zf(Q, 1.0), Q).max() for s in scales]
    assert np.all(np.diff(to_mrt) <= 1e-12)
    assert np.all(np.diff(to_zf) >= -1e-12)


def test_mmse_maximizes_slnr(four_users, rng):
    scenario, Q, _, _ = four_users
    K, P, s2 = 4, scenario.power_budget, scenario.noise_power
    A = mmse(Q, P, s2, P / K)
    best = slnr(Q, A, s2)
    for _ in range(1000):
        B = unit_power_columns(Q, rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K))) * np.sqrt(P / K)
        assert np.all(slnr(Q, B, s2) <= best * (1 + 1e-12))


def test_mmse_rejects_bad_budget(four_users):
    _, Q, _, _ = four_users
    with pytest.raises(DomainError):
        mmse(Q, 0.0, 1.0, 1.0)


def test_negative_power_rejected(four_users):
    _, Q, _, _ = four_users
    with pytest.raises(DomainError):
        zf(Q, [-1.0, 1.0, 1.0, 1.0])


# -- theorem structure -----------------------------------------------------------


def test_equal_lambda_structure_is_mmse(four_users):
    scenario, Q, _, _ = four_users
    P, s2 = scenario.power_budget, scenario.noise_power
    A = optimal_structure(Q, np.full(4, P / 4), np.ones(4), s2)
    assert column_angles(A, mmse(Q, P, s2, 1.0), Q).max() < 1e-7


def test_zero_lambda_structure_is_identity(four_users):
    scenario, Q, _, _ = four_users
    p = np.array([1.0, 4.0, 9.0, 16.0])
    A = optimal_structure(Q, np.zeros(4), p, scenario.noise_power)
    assert np.allclose(A, np.diag(np.sqrt(p)), rtol=0, atol=1e-15)


def test_woodbury_identity(four_users, rng):
    scenario, Q, _, _ = four_users
    s2 = scenario.noise_power
    lam = rng.uniform(0, 1e-3, 4)
    X = np.diag(lam) @ Q / s2
    D = np.linalg.inv(np.eye(4) + X)
    assert np.allclose(np.eye(4) - D @ X, D, rtol=0, atol=1e-12)
    A = optimal_structure(Q, lam, np.ones(4), s2)
    assert np.allclose(A, D, rtol=0, atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 4))
def test_structured_power_finite(seed, k):
    rng = np.random.default_rng(seed)
    Q, _, _ = gram(random_scenario(seed, k), 8)
    A = optimal_structure(Q, rng.uniform(0, 1e-2, k), rng.uniform(0, 1e-3, k), 5.6e-3)
    power = transmit_power(Q, A)
    assert np.isfinite(power) and power >= 0


# -- operator inverse -----------------------------------------------------------


def test_operator_inverse_zero_rho(four_users):
    _, Q, grid, samples = four_users
    assert verify_operator_inverse(Q, np.zeros(4), samples, grid) == 0.0


def test_operator_inverse_single_user():
    Q, grid, samples = gram(on_axis())
    assert operator_inverse_matrix(Q, [1.0])[0, 0] == pytest.approx(1 / (1 + Q[0, 0].real), rel=1e-12)
    assert verify_operator_inverse(Q, [1.0], samples, grid) < 1e-10


def test_operator_inverse_four_users(four_users, rng):
    _, Q, grid, samples = four_users
    for _ in range(5):
        rho = rng.uniform(0, 1, 4)
        assert verify_operator_inverse(Q, rho, samples, grid) < 1e-8
