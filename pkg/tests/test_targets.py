import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgvqe.pauli import check_density_matrix, partial_trace, purity
from sgvqe.targets import (
    Mps,
    ancilla_count,
    load_amplitudes,
    mps_to_statevector,
    random_mixed_target,
    random_mps,
    save_amplitudes,
)


def schmidt_ranks(psi, n, tol=1e-10):
    return [int(np.sum(np.linalg.svd(psi.reshape(2**c, -1), compute_uv=False) > tol)) for c in range(1, n)]


def test_basis_embedding():
    t = np.zeros((1, 2, 1))
    t[0, 0, 0] = 1
    psi = mps_to_statevector(Mps((t,) * 4))
    expected = np.zeros(16)
    expected[0] = 1
    np.testing.assert_allclose(psi, expected)


def test_per_bitstring_trace_oracle():
    mps = random_mps(3, 2, seed=4)
    amps = []
    for bits in itertools.product((0, 1), repeat=3):
        m = np.eye(1)
        for t, s in zip(mps.tensors, bits):
            m = m @ t[:, s, :]
        amps.append(np.trace(m))
    amps = np.array(amps)
    np.testing.assert_allclose(mps_to_statevector(mps), amps / np.linalg.norm(amps), atol=1e-14)


def test_bond_dims_and_determinism():
    mps = random_mps(8, 4, seed=1)
    assert mps.bond_dims == [2, 4, 4, 4, 4, 4, 2]
    again = random_mps(8, 4, seed=1)
    assert all(np.array_equal(a, b) for a, b in zip(mps.tensors, again.tensors))
    assert abs(np.linalg.norm(mps_to_statevector(mps)) - 1) < 1e-10


def test_product_state_for_unit_bond():
    psi = mps_to_statevector(random_mps(2, 1, seed=3))
    assert purity(partial_trace(psi, [0])) == pytest.approx(1.0, abs=1e-10)


def test_generic_rank_saturates_bond():
    psi = mps_to_statevector(random_mps(8, 4, seed=2))
    assert schmidt_ranks(psi, 8) == [2, 4, 4, 4, 4, 4, 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_schmidt_rank_cap(n, bond, seed):
    psi = mps_to_statevector(random_mps(n, bond, seed))
    assert max(schmidt_ranks(psi, n)) <= bond


def test_mps_validation():
    with pytest.raises(ValueError):
        Mps((np.ones((2, 2, 1)),))
    with pytest.raises(ValueError):
        Mps((np.ones((1, 2, 2)), np.ones((3, 2, 1))))
    with pytest.raises(ValueError):
        random_mps(4, 0)
    with pytest.raises(ValueError):
        mps_to_statevector(random_mps(21, 1))


def test_mixed_target_single_component_is_pure():
    rho, w = random_mixed_target(3, 1, 2, seed=0)
    np.testing.assert_allclose(w, [1.0])
    assert purity(rho) == pytest.approx(1.0, abs=1e-10)


def test_mixed_target_normalisation():
    rho, w = random_mixed_target(4, 10, 2, seed=7)
    assert w.shape == (10,) and np.all(w > 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert purity(rho) < 1
    check_density_matrix(rho)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_mixed_target_is_density_matrix(n, m, bond, seed):
    rho, _ = random_mixed_target(n, m, bond, seed)
    check_density_matrix(rho)


def test_mixed_target_limits():
    with pytest.raises(ValueError):
        random_mixed_target(11, 2, 2)
    with pytest.raises(ValueError):
        random_mixed_target(3, 0, 2)


def test_ancilla_count():
    assert [ancilla_count(m) for m in (1, 2, 3, 4, 5, 10, 16, 17)] == [0, 1, 2, 2, 3, 4, 4, 5]


def test_amplitude_dump_round_trip(tmp_path):
    psi = mps_to_statevector(random_mps(5, 3, seed=5))
    path = tmp_path / "t.amp"
    save_amplitudes(path, psi)
    raw = path.read_bytes()
    assert len(raw) == 8 + 16 * 32
    assert int.from_bytes(raw[:8], "little") == 32
    np.testing.assert_array_equal(load_amplitudes(path), psi)
    path.write_bytes(raw[:-16])
    with pytest.raises(ValueError):
        load_amplitudes(path)
