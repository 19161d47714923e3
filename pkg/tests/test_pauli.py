import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pauli_matrix, random_density, random_state
from sgvqe.lattice import LatticeSpec
from sgvqe.models import IsingParams, ising_1d, ising_lattice, xxz_1d
from sgvqe.pauli import (
    LanczosError,
    PauliSum,
    PauliTerm,
    apply_pauli_sum,
    check_density_matrix,
    ground_energy_dense,
    ground_energy_lanczos,
    mixed_fidelity,
    partial_trace,
    purity,
)

RNG = np.random.default_rng(99)

pauli_words = st.dictionaries(
    st.integers(0, 3), st.sampled_from("XYZ"), max_size=4
).map(lambda d: " ".join(f"{p}{q}" for q, p in sorted(d.items())))
pauli_sums = st.lists(
    st.tuples(st.floats(-5, 5, allow_nan=False).filter(lambda c: c != 0), pauli_words), max_size=8
).map(lambda terms: PauliSum(4, tuple(PauliTerm.parse(c, w) for c, w in terms)))


def test_identity_scales():
    psi = random_state(3, RNG)
    np.testing.assert_allclose(apply_pauli_sum(PauliSum.identity(3, 1.7), psi), 1.7 * psi)


def test_z_on_one():
    out = apply_pauli_sum(PauliSum.from_dict(1, {"Z0": 1.0}), np.array([0, 1], dtype=complex))
    np.testing.assert_allclose(out, [0, -1])


def test_x_plus_z_on_zero():
    out = apply_pauli_sum(PauliSum.from_dict(1, {"X0": 1.0, "Z0": 1.0}), np.array([1, 0], dtype=complex))
    np.testing.assert_allclose(out, [1, 1])


def test_apply_matches_kron_oracle():
    h = PauliSum.from_dict(4, {"X0 Y2": 0.3, "Y1 Y3": -1.1, "Z0 X1 Z3": 0.8, "Y0": 0.4, "": -0.25})
    psi = random_state(4, RNG)
    np.testing.assert_allclose(h.apply(psi), pauli_matrix(h) @ psi, atol=1e-13)
    np.testing.assert_allclose(h.to_matrix(), pauli_matrix(h), atol=1e-13)


def test_apply_without_cache_matches(monkeypatch):
    h = xxz_1d(5)
    psi = random_state(5, RNG)
    cached = h.apply(psi)
    monkeypatch.setattr("sgvqe.pauli._CACHE_BUDGET", 0)
    fresh = xxz_1d(5)
    np.testing.assert_allclose(fresh.apply(psi), cached, atol=1e-14)


def test_size_mismatch():
    with pytest.raises(ValueError):
        apply_pauli_sum(ising_1d(3), random_state(2, RNG))


def test_canonical_merging():
    h = PauliSum(2, (PauliTerm.parse(1.0, "Z0 Z1"), PauliTerm.parse(0.5, "Z1 Z0"), PauliTerm.parse(2.0, "X0"),
                     PauliTerm.parse(-2.0, "X0")))
    assert h.to_dict() == {"Z0 Z1": 1.5}
    with pytest.raises(ValueError):
        PauliTerm.parse(1.0, "X0 Z0")
    with pytest.raises(ValueError):
        PauliSum(2, (PauliTerm.parse(1.0, "X2"),))


def test_adding_twice_doubles():
    h = ising_1d(3)
    assert (h + h) == h * 2


@settings(max_examples=50, deadline=None)
@given(pauli_sums)
def test_text_round_trip(h):
    assert PauliSum.from_text(h.to_text()) == h


@settings(max_examples=30, deadline=None)
@given(pauli_sums)
def test_matrix_hermitian(h):
    m = h.to_matrix()
    np.testing.assert_allclose(m, m.conj().T, atol=1e-12)


def test_text_format_parsing():
    text = "# ising\nqubits: 2\n-1.0 Z0 Z1\n-0.5 X0\n-0.5 X1\n0.25\n"
    h = PauliSum.from_text(text)
    assert h.to_dict() == {"": 0.25, "X0": -0.5, "X1": -0.5, "Z0 Z1": -1.0}
    with pytest.raises(ValueError, match="line 2"):
        PauliSum.from_text("qubits: 2\nabc Z0\n")
    with pytest.raises(ValueError, match="line 3"):
        PauliSum.from_text("qubits: 2\n1.0 Z0\n1.0 X5\n")
    with pytest.raises(ValueError, match="header"):
        PauliSum.from_text("1.0 Z0\n")


def test_dense_ground_energies():
    assert ground_energy_dense(PauliSum.from_dict(1, {"Z0": -1.0})) == pytest.approx(-1.0)
    assert ground_energy_dense(PauliSum.from_dict(1, {"X0": -1.0})) == pytest.approx(-1.0)
    # characteristic polynomial (l - 1)(l + 1)(l^2 - 2)
    assert ground_energy_dense(ising_1d(2, IsingParams(1.0, 0.5))) == pytest.approx(-np.sqrt(2), abs=1e-13)
    # -XX - YY - ZZ/2 on 2 qubits: spectrum {-3/2, -1/2, -1/2, 5/2}
    assert ground_energy_dense(xxz_1d(2)) == pytest.approx(-1.5, abs=1e-13)
    with pytest.raises(ValueError):
        ground_energy_dense(ising_1d(13))


@pytest.mark.parametrize(
    "h",
    [ising_1d(8), xxz_1d(9), ising_lattice(LatticeSpec((2, 5))), xxz_1d(4) + ising_1d(4),
     PauliSum.from_dict(3, {"X0 Y1": 0.7, "Y1 Z2": -0.3, "Z0": 0.2})],
    ids=["ising8", "xxz9", "ising2x5", "mixed4", "complex3"],
)
def test_lanczos_matches_dense(h):
    assert ground_energy_lanczos(h) == pytest.approx(ground_energy_dense(h), abs=1e-8)


def test_lanczos_diagonal_twenty_qubits():
    h = PauliSum(20, tuple(PauliTerm(-1.0, ((i, "Z"),)) for i in range(20)))
    assert ground_energy_lanczos(h) == pytest.approx(-20.0, abs=1e-9)


def test_lanczos_tolerance_self_consistency():
    h = ising_1d(15)
    loose = ground_energy_lanczos(h, tol=1e-7)
    tight = ground_energy_lanczos(h, tol=1e-11, max_iter=2000)
    assert loose == pytest.approx(tight, abs=1e-7)


def test_lanczos_restart_path():
    h = xxz_1d(10)
    assert ground_energy_lanczos(h, krylov_dim=8, max_iter=5000) == pytest.approx(ground_energy_dense(h), abs=1e-8)


def test_lanczos_reports_best_estimate():
    with pytest.raises(LanczosError) as info:
        ground_energy_lanczos(xxz_1d(10), max_iter=3)
    assert np.isfinite(info.value.estimate)
    assert info.value.estimate >= ground_energy_dense(xxz_1d(10)) - 1e-9


def test_partial_trace_product_state():
    plus = np.array([1, 1]) / np.sqrt(2)
    psi = np.kron([1, 0], plus).astype(complex)
    np.testing.assert_allclose(partial_trace(psi, {0}), [[1, 0], [0, 0]], atol=1e-15)


def test_partial_trace_bell():
    bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    np.testing.assert_allclose(partial_trace(bell, {0}), np.eye(2) / 2)


def test_partial_trace_index_sum_oracle():
    psi = random_state(4, RNG)
    t = psi.reshape(2, 2, 2, 2)
    ref = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for b in range(2):
            for a2 in range(2):
                for b2 in range(2):
                    ref[2 * a + b, 2 * a2 + b2] = sum(
                        t[a, b, c, d] * np.conj(t[a2, b2, c, d]) for c in range(2) for d in range(2)
                    )
    np.testing.assert_allclose(partial_trace(psi, [0, 1]), ref, atol=1e-14)
    # non-leading keep set: trace out qubits 0 and 2
    ref13 = np.einsum("abcd,aecf->bdef", t, t.conj()).reshape(4, 4)
    np.testing.assert_allclose(partial_trace(psi, [1, 3]), ref13, atol=1e-14)


def test_partial_trace_errors():
    psi = random_state(3, RNG)
    with pytest.raises(ValueError):
        partial_trace(psi, [])
    with pytest.raises(ValueError):
        partial_trace(psi, [3])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.data())
def test_partial_trace_is_density_matrix(n, data):
    keep = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    psi = random_state(n, np.random.default_rng(data.draw(st.integers(0, 2**32 - 1))))
    check_density_matrix(partial_trace(psi, keep))


def test_mixed_fidelity_values():
    rho = random_density(2, 3, RNG)
    assert mixed_fidelity(rho, rho) == pytest.approx(1.0)
    zero, one = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert mixed_fidelity(zero, one) == 0.0
    sigma = random_density(2, 2, RNG)
    ref = abs(np.trace(rho @ sigma)) / np.sqrt(np.trace(rho @ rho).real * np.trace(sigma @ sigma).real)
    assert mixed_fidelity(rho, sigma) == pytest.approx(ref, abs=1e-14)
    assert mixed_fidelity(rho, sigma) == pytest.approx(mixed_fidelity(sigma, rho), abs=1e-12)
    with pytest.raises(ValueError):
        mixed_fidelity(rho, zero)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_mixed_fidelity_bounded_and_symmetric(n, r1, r2, seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(n, r1, rng), random_density(n, r2, rng)
    f = mixed_fidelity(a, b)
    assert -1e-9 <= f <= 1 + 1e-9
    assert f == pytest.approx(mixed_fidelity(b, a), abs=1e-12)


def test_purity_and_checks():
    assert purity(np.eye(4) / 4) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.5, -0.5]))
