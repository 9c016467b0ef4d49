import numpy as np
import pytest

from cipt.circuit import (CHAOTIC, CONTROL, CircuitParams, approx_haar_gate,
                          deserialize_circuit, haar_unitary, sample_circuit,
                          serialize_circuit)
from cipt.errors import FormatError, ParameterError, UnsupportedVersionError

from conftest import binomial_bounds

CZ = np.diag([1.0, 1.0, 1.0, -1.0])


def test_walker_path_all_control():
    # control moves the walker one site down (mod L)
    c = sample_circuit(CircuitParams(L=4, p=1.0, t_max=3, master_seed=1), 0)
    assert [op.site for op in c.steps] == [0, 3, 2]
    assert all(op.kind == CONTROL for op in c.steps)


def test_walker_path_all_chaotic():
    c = sample_circuit(CircuitParams(L=4, p=0.0, t_max=3, master_seed=1), 0)
    assert [op.site for op in c.steps] == [0, 1, 2]
    assert all(op.kind == CHAOTIC for op in c.steps)


def test_walker_wraps_periodic():
    c = sample_circuit(CircuitParams(L=4, p=0.0, t_max=6, master_seed=1), 0)
    assert [op.site for op in c.steps] == [0, 1, 2, 3, 0, 1]


def test_walker_clamped_open():
    c = sample_circuit(CircuitParams(L=3, p=0.0, t_max=5, boundary="open",
                                     master_seed=1), 0)
    # open chain: position sticks at the top edge
    assert [op.site for op in c.steps] == [0, 1, 2, 2, 2]
    c2 = sample_circuit(CircuitParams(L=3, p=1.0, t_max=4, boundary="open",
                                      master_seed=1), 0)
    assert [op.site for op in c2.steps] == [0, 0, 0, 0]


def test_default_t_max_and_initial_position():
    c = sample_circuit(CircuitParams(L=6, p=0.5, master_seed=0), 0)
    assert c.t_max == 18
    assert c.steps[0].site == 0
    c2 = sample_circuit(CircuitParams(L=6, p=0.0, t_max=2, master_seed=0,
                                      initial_position=4), 0)
    assert [op.site for op in c2.steps] == [4, 5]


def test_control_fraction_binomial():
    p = 0.3
    total = 0
    n_steps = 0
    for ci in range(40):
        c = sample_circuit(CircuitParams(L=8, p=p, t_max=32, master_seed=5), ci)
        total += int(np.sum(c.kinds == CONTROL))
        n_steps += c.t_max
    lo, hi = binomial_bounds(n_steps, p)
    assert lo <= total <= hi


def test_circuits_differ_by_index_and_seed():
    params = CircuitParams(L=8, p=0.5, t_max=32, master_seed=9)
    a = sample_circuit(params, 0)
    b = sample_circuit(params, 1)
    assert not np.array_equal(a.kinds, b.kinds) or not np.array_equal(
        a.angles, b.angles)
    a2 = sample_circuit(params, 0)
    assert np.array_equal(a.kinds, a2.kinds)
    assert np.array_equal(a.angles, a2.angles)


@pytest.mark.parametrize("ensemble", ["approx_haar_cz", "exact_haar"])
@pytest.mark.parametrize("boundary", ["periodic", "open"])
def test_serialize_round_trip(ensemble, boundary):
    params = CircuitParams(L=5, p=0.4, t_max=20, ensemble=ensemble,
                           boundary=boundary, master_seed=3)
    c = sample_circuit(params, 7)
    c2 = deserialize_circuit(serialize_circuit(c))
    assert c2.params == c.params
    assert c2.circuit_index == 7
    assert np.array_equal(c2.kinds, c.kinds)
    assert np.array_equal(c2.sites, c.sites)
    if ensemble == "approx_haar_cz":
        assert np.array_equal(c2.angles, c.angles)
    else:
        assert len(c2.matrices) == len(c.matrices)
        for m1, m2 in zip(c.matrices, c2.matrices):
            assert np.array_equal(m1, m2)


def test_deserialize_bad_magic_reports_offset():
    c = sample_circuit(CircuitParams(L=4, p=0.5, t_max=4, master_seed=0), 0)
    data = bytearray(serialize_circuit(c))
    data[0] = 0xFF
    with pytest.raises(FormatError) as exc:
        deserialize_circuit(bytes(data))
    assert exc.value.offset == 0


def test_deserialize_truncated_reports_offset():
    c = sample_circuit(CircuitParams(L=4, p=0.5, t_max=4, master_seed=0), 0)
    data = serialize_circuit(c)
    with pytest.raises(FormatError) as exc:
        deserialize_circuit(data[: len(data) - 3])
    assert exc.value.offset > 0


def test_deserialize_unknown_version():
    c = sample_circuit(CircuitParams(L=4, p=0.5, t_max=4, master_seed=0), 0)
    data = bytearray(serialize_circuit(c))
    data[4] = 99  # version byte follows the 4-byte magic
    with pytest.raises(UnsupportedVersionError):
        deserialize_circuit(bytes(data))


def test_haar_unitary_is_unitary(rng):
    for dim in (2, 4):
        u = haar_unitary(rng, dim)
        assert np.allclose(u @ u.conj().T, np.eye(dim), atol=1e-12)


def test_haar_first_entry_moment(rng):
    # |U_00|^2 of a Haar U(4) is Beta(1,3): mean 1/4
    vals = np.array([abs(haar_unitary(rng, 4)[0, 0]) ** 2
                     for _ in range(3000)])
    se = np.sqrt(3.0 / 80.0 / len(vals))
    assert abs(vals.mean() - 0.25) < 3 * se


def test_haar_phase_convention_not_qr_artifact(rng):
    # raw QR without the R-diagonal fix biases the first column real part;
    # the fixed sampler has E[Re U_00] = 0
    vals = np.array([haar_unitary(rng, 4)[0, 0].real for _ in range(3000)])
    assert abs(vals.mean()) < 3 * vals.std(ddof=1) / np.sqrt(len(vals))


def test_approx_haar_gate_structure(rng):
    angles = rng.uniform(0, 2 * np.pi, 12)
    g_cz = approx_haar_gate(angles, cz_present=True)
    g_no = approx_haar_gate(angles, cz_present=False)
    assert np.allclose(g_cz @ g_cz.conj().T, np.eye(4), atol=1e-12)
    # g_cz g_no^dag is the CZ conjugated by the outer unitary pair, so its
    # spectrum must be {1, 1, 1, -1}
    eigs = np.sort(np.linalg.eigvals(g_cz @ g_no.conj().T).real)
    assert np.allclose(eigs, [-1.0, 1.0, 1.0, 1.0], atol=1e-10)


def test_open_edge_gate_is_single_site():
    params = CircuitParams(L=3, p=0.0, t_max=5, boundary="open",
                           master_seed=2)
    c = sample_circuit(params, 0)
    edge_ops = [op for op in c.steps if op.site == params.L - 1]
    assert edge_ops
    for op in edge_ops:
        assert op.gate.n_sites == 1
        assert op.gate.to_matrix().shape == (2, 2)


def test_periodic_has_no_edge_gates():
    c = sample_circuit(CircuitParams(L=3, p=0.0, t_max=9, master_seed=2), 0)
    assert all(op.gate.n_sites == 2 for op in c.steps)


@pytest.mark.parametrize("bad", [
    dict(L=1, p=0.5),
    dict(L=4, p=-0.1),
    dict(L=4, p=1.5),
    dict(L=4, p=0.5, t_max=-1),
    dict(L=4, p=0.5, boundary="twisted"),
    dict(L=4, p=0.5, ensemble="clifford"),
    dict(L=4, p=0.5, initial_position=4),
])
def test_invalid_params_rejected(bad):
    with pytest.raises(ParameterError):
        sample_circuit(CircuitParams(**bad), 0)
