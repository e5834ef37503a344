import numpy as np
import pytest
from _util import random_density, random_hermitian

from spinkinetics import (
    BasisLabel,
    DensityMatrix,
    DimensionMismatchError,
    NonDecayingGeneratorError,
    OperatorMatrix,
    Superoperator,
    ValidationError,
    anticommutator_super,
    assemble_generator,
    commutator_super,
    conjugation_super,
    infinite_time_integral,
    projector_dephasing_super,
    propagate,
    sandwich_super,
)

B3 = BasisLabel(("0", "1", "2"))
B4 = BasisLabel(("a", "b", "c", "d"))


def op(basis, entries):
    return OperatorMatrix(basis, entries)


class TestBasis:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError):
            BasisLabel(("x", "x"))

    def test_too_small_rejected(self):
        with pytest.raises(ValidationError):
            BasisLabel(("x",))

    def test_index_lookup(self):
        assert B3.index("2") == 2
        with pytest.raises(ValidationError):
            B3.index("T+")


class TestConstructors:
    def test_commutator_with_identity_is_zero(self):
        sup = commutator_super(op(B3, np.eye(3)))
        assert np.abs(sup.matrix).max() == 0.0

    def test_commutator_diagonal_gives_transition_frequency(self):
        omega0, omega_s = 2.3, 1.7
        h = op(B3, np.diag([omega0, 0.5 * omega_s, -0.5 * omega_s]))
        rho = np.zeros((3, 3), dtype=complex)
        rho[0, 1] = 1.0
        out = commutator_super(h).apply(rho)
        assert out[0, 1] == pytest.approx(omega0 - 0.5 * omega_s, rel=1e-14)
        out[0, 1] = 0.0
        assert np.abs(out).max() == 0.0

    def test_commutator_matches_direct_product(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = random_hermitian(4, rng)
            rho = random_density(4, rng)
            direct = a @ rho - rho @ a
            assert np.abs(commutator_super(op(B4, a)).apply(rho) - direct).max() < 1e-13

    def test_anticommutator_identity_doubles(self):
        rng = np.random.default_rng(4)
        rho = random_density(3, rng)
        out = anticommutator_super(op(B3, np.eye(3))).apply(rho)
        assert np.abs(out - 2 * rho).max() < 1e-15

    def test_anticommutator_one_sided_projection(self):
        p0 = np.diag([1.0, 0.0, 0.0])
        rho = np.zeros((3, 3), dtype=complex)
        rho[0, 1] = 1.0  # |0><1|: projector acts from the left only
        out = anticommutator_super(op(B3, p0)).apply(rho)
        assert np.abs(out - rho).max() < 1e-15

    def test_anticommutator_matches_direct_product(self):
        rng = np.random.default_rng(5)
        a = random_hermitian(4, rng)
        rho = random_density(4, rng)
        direct = a @ rho + rho @ a
        assert np.abs(anticommutator_super(op(B4, a)).apply(rho) - direct).max() < 1e-13

    def test_sandwich_identity_is_identity(self):
        sup = sandwich_super(op(B3, np.eye(3)))
        assert np.abs(sup.matrix - np.eye(9)).max() == 0.0

    def test_sandwich_projector_keeps_projected_state(self):
        p1 = np.diag([0.0, 1.0, 0.0])
        rho = np.diag([0.0, 1.0, 0.0]).astype(complex)
        out = sandwich_super(op(B3, p1)).apply(rho)
        assert np.abs(out - rho).max() < 1e-15

    def test_sandwich_matches_direct_product(self):
        rng = np.random.default_rng(6)
        a = random_hermitian(4, rng)
        rho = random_density(4, rng)
        assert np.abs(sandwich_super(op(B4, a)).apply(rho) - a @ rho @ a).max() < 1e-13

    def test_conjugation_matches_direct_product(self):
        rng = np.random.default_rng(7)
        a = random_hermitian(4, rng)
        b = random_hermitian(4, rng)
        rho = random_density(4, rng)
        out = conjugation_super(op(B4, a), op(B4, b)).apply(rho)
        assert np.abs(out - a @ rho @ b).max() < 1e-13

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            OperatorMatrix(B3, np.eye(4))

    def test_basis_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            conjugation_super(op(B3, np.eye(3)), op(BasisLabel(("x", "y", "z")), np.eye(3)))


class TestGenerator:
    def test_pure_decay_reactor(self):
        kappa = 3.5
        h = op(B3, np.zeros((3, 3)))
        k = kappa * Superoperator.identity(B3)
        gen = assemble_generator(h, reactors=[k])
        assert np.abs(gen.matrix + kappa * np.eye(9)).max() < 1e-14

    def test_generator_preserves_hermiticity(self):
        rng = np.random.default_rng(8)
        h = op(B4, random_hermitian(4, rng))
        relaxer = projector_dephasing_super(op(B4, np.diag([1.0, 0, 0, 0])))
        gen = assemble_generator(h, relaxers=[-2.0 * relaxer])
        assert gen.hermiticity_defect_sample() < 1e-12
        rho = random_density(4, rng)
        out = gen.apply(rho)
        assert np.abs(out - out.conj().T).max() < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(9)
        gen = assemble_generator(op(B4, random_hermitian(4, rng)))
        r1 = random_density(4, rng)
        r2 = random_density(4, rng)
        a, b = 0.3 - 0.2j, 1.1 + 0.4j
        lhs = gen.apply(a * r1 + b * r2)
        rhs = a * gen.apply(r1) + b * gen.apply(r2)
        assert np.abs(lhs - rhs).max() < 1e-13

    def test_commutator_traceless(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            a = random_hermitian(4, rng)
            rho = random_density(4, rng)
            assert abs(np.trace(commutator_super(op(B4, a)).apply(rho))) < 1e-12


def _random_lindblad_generator(rng, basis):
    """Trace-preserving random generator: -i[H, .] + dissipator."""
    n = basis.dim
    h = OperatorMatrix(basis, random_hermitian(n, rng, scale=2.0))
    l_raw = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    l_op = OperatorMatrix(basis, l_raw / np.linalg.norm(l_raw))
    l_dag = OperatorMatrix(basis, l_op.entries.conj().T)
    l_dag_l = OperatorMatrix(basis, l_dag.entries @ l_op.entries)
    dissipator = conjugation_super(l_op, l_dag) - 0.5 * anticommutator_super(l_dag_l)
    return assemble_generator(h, relaxers=[2.0 * dissipator])


class TestPropagate:
    def test_uniform_decay(self):
        kappa = 2.0
        gen = -kappa * Superoperator.identity(B3)
        rho0 = DensityMatrix.basis_state(B3, "1")
        times = np.linspace(0.1, 2.0, 8)
        prop = propagate(gen, rho0, times)
        for t, state in zip(prop.times, prop.states):
            assert state.population("1") == pytest.approx(np.exp(-kappa * t), rel=1e-12)

    def test_expm_and_rk_agree(self):
        rng = np.random.default_rng(11)
        gen = _random_lindblad_generator(rng, B4)
        t_final = 5.0 / gen.norm()
        times = np.linspace(t_final / 4, t_final, 4)
        rho0 = DensityMatrix(B4, random_density(4, rng))
        a = propagate(gen, rho0, times, method="expm")
        b = propagate(gen, rho0, times, method="rk")
        worst = max(
            np.abs(x.entries - y.entries).max() for x, y in zip(a.states, b.states)
        )
        assert worst < 1e-8

    def test_semigroup_property(self):
        rng = np.random.default_rng(12)
        gen = _random_lindblad_generator(rng, B3)
        rho0 = DensityMatrix(B3, random_density(3, rng))
        t1, t2 = 0.13 / gen.norm(), 0.71 / gen.norm()
        two_steps = propagate(gen, rho0, [t1, t1 + t2]).states[-1]
        one_step = propagate(gen, rho0, [t1 + t2]).states[-1]
        assert np.abs(two_steps.entries - one_step.entries).max() < 1e-9

    def test_bad_times_rejected(self):
        gen = -1.0 * Superoperator.identity(B3)
        rho0 = DensityMatrix.basis_state(B3, "0")
        with pytest.raises(ValidationError):
            propagate(gen, rho0, [0.2, 0.1])
        with pytest.raises(ValidationError):
            propagate(gen, rho0, [-0.1, 0.2])
        with pytest.raises(ValidationError):
            propagate(gen, rho0, [0.1], method="simpson")


class TestInfiniteTimeIntegral:
    def test_uniform_decay_gives_rho_over_kappa(self):
        kappa = 4.0
        gen = -kappa * Superoperator.identity(B3)
        rho0 = DensityMatrix.basis_state(B3, "0")
        x = infinite_time_integral(gen, rho0)
        assert np.abs(x.entries - rho0.entries / kappa).max() < 1e-14

    def test_nondecaying_generator_rejected(self):
        h = op(B3, np.diag([1.0, 2.0, 3.0]))
        gen = assemble_generator(h)  # purely imaginary spectrum
        with pytest.raises(NonDecayingGeneratorError):
            infinite_time_integral(gen, DensityMatrix.basis_state(B3, "0"))

    def test_matches_quadrature(self):
        from scipy.integrate import simpson

        rng = np.random.default_rng(13)
        gen = _random_lindblad_generator(rng, B3) - 1.5 * Superoperator.identity(B3)
        rho0 = DensityMatrix(B3, random_density(3, rng))
        x = infinite_time_integral(gen, rho0)
        t = np.linspace(0.0, 20.0, 4001)
        prop = propagate(gen, rho0, t[1:])
        stack = np.array([rho0.entries] + [s.entries for s in prop.states])
        quad = simpson(stack, x=t, axis=0)
        assert np.abs(x.entries - quad).max() / np.abs(x.entries).max() < 1e-6


class TestDensityValidation:
    def test_trace_above_one_rejected(self):
        with pytest.raises(ValidationError):
            DensityMatrix(B3, np.diag([0.8, 0.8, 0.0]))

    def test_non_hermitian_rejected(self):
        m = np.zeros((3, 3), dtype=complex)
        m[0, 0] = 1.0
        m[0, 1] = 0.5
        with pytest.raises(ValidationError):
            DensityMatrix(B3, m)

    def test_negative_eigenvalue_rejected(self):
        m = np.diag([0.8, 0.3, -0.1])
        with pytest.raises(ValidationError):
            DensityMatrix(B3, m)

    def test_decayed_trace_allowed(self):
        DensityMatrix(B3, np.diag([0.1, 0.05, 0.0]))
