import math

import numpy as np
import pytest

from bohmflow.critical import (_lattice_positions, near_escape, nodal_points,
                               y_points)
from bohmflow.errors import AtNode
from bohmflow.models import (OscillatorFrequencies, SingleNodeModel,
                             TwoQubitModel, eval_psi, make_two_qubit, psi_sq,
                             quantum_potential, velocity, velocity_jacobian)

SQRT1_2 = math.sqrt(0.5)
SQRT3 = math.sqrt(3.0)


def random_times(rng, n, model, lo=0.05, hi=8.5, margin=0.01):
    out = []
    while len(out) < n:
        t = rng.uniform(lo, hi)
        if not near_escape(model, t, guard=margin):
            out.append(t)
    return out


class TestConstruction:
    def test_make_two_qubit_maximal(self):
        m = make_two_qubit(SQRT1_2, a0=2.5)
        assert m.c1 == pytest.approx(SQRT1_2, abs=1e-15)

    def test_make_two_qubit_product_state(self):
        m = make_two_qubit(0.0, a0=2.5)
        assert m.c1 == 1.0 and m.c2 == 0.0

    def test_make_two_qubit_pythagorean(self):
        assert make_two_qubit(0.6, a0=2.5).c1 == pytest.approx(0.8, abs=1e-15)

    @pytest.mark.parametrize("bad", [-0.1, 1.5])
    def test_c2_range_rejected(self, bad):
        with pytest.raises(ValueError):
            make_two_qubit(bad)

    def test_a0_rejected(self):
        with pytest.raises(ValueError):
            make_two_qubit(0.3, a0=-1.0)

    def test_overlap_warning(self):
        with pytest.warns(UserWarning, match="overlap"):
            make_two_qubit(0.3, a0=1.0)

    def test_normalization_invariant(self):
        with pytest.raises(ValueError):
            TwoQubitModel(c1=0.9, c2=0.6, a0=2.5,
                          frequencies=OscillatorFrequencies(1.0, SQRT3))

    def test_single_node_needs_b_c(self):
        with pytest.raises(ValueError):
            SingleNodeModel(1.0, 0.0, 1.0, OscillatorFrequencies(1.0, SQRT3))

    def test_commensurable_validation(self):
        fr = OscillatorFrequencies.from_ratio(2, 4, 0.5)
        assert fr.commensurable == (1, 2, 0.5)
        assert fr.period == pytest.approx(4 * math.pi)
        with pytest.raises(ValueError):
            OscillatorFrequencies(1.0, 2.0, commensurable=(2, 4, 0.5))


class TestPsi:
    def test_vanishes_at_two_qubit_nodes(self, two_qubit_max, rng):
        for t in random_times(rng, 50, two_qubit_max):
            ref = max(1.0, abs(eval_psi(two_qubit_max, 0.0, 0.0, t)))
            for node in nodal_points(two_qubit_max, t, 11):
                assert abs(eval_psi(two_qubit_max, *node.position, t)) \
                    < 1e-9 * ref

    def test_vanishes_at_single_nodes(self, single_node):
        node = nodal_points(single_node, 1.5)[0]
        assert abs(eval_psi(single_node, *node.position, 1.5)) < 1e-10

    def test_effective_support_edge(self, two_qubit_max):
        assert psi_sq(two_qubit_max, 6.0, 6.0, 0.0) <= 1e-21

    def test_psi_sq_matches_direct_evaluation(self, two_qubit_mid, rng):
        for _ in range(50):
            x, y = rng.uniform(-4, 4, 2)
            t = rng.uniform(0, 8)
            direct = abs(eval_psi(two_qubit_mid, x, y, t)) ** 2
            assert psi_sq(two_qubit_mid, x, y, t) == pytest.approx(
                direct, rel=1e-10, abs=1e-300)


class TestVelocity:
    def test_zero_at_t0(self, two_qubit_max, rng):
        for _ in range(10):
            x, y = rng.uniform(-3, 3, 2)
            v = velocity(two_qubit_max, x, y, 0.0)
            assert v.vx == 0.0 and v.vy == 0.0

    def test_zero_at_y_points(self, two_qubit_max, rng):
        # floor=0 bypasses the AtNode density guard: far-out Y-points can
        # underflow |Psi|^2 while the closed-form field stays well-defined
        for t in random_times(rng, 50, two_qubit_max):
            for yp in y_points(two_qubit_max, t, 11):
                v = velocity(two_qubit_max, *yp.position, t, floor=0.0)
                assert math.hypot(v.vx, v.vy) < 1e-9

    def test_commensurable_halt_instant(self):
        fr = OscillatorFrequencies.from_ratio(1, 2, 1.0)
        m = TwoQubitModel(c1=math.sqrt(0.91), c2=0.3, a0=2.5, frequencies=fr)
        rng = np.random.default_rng(1)
        for _ in range(10):
            x, y = rng.uniform(-3, 3, 2)
            v = velocity(m, x, y, math.pi)
            assert math.hypot(v.vx, v.vy) < 1e-10

    def test_matches_gradient_of_psi(self, two_qubit_mid, rng):
        # independent oracle: Im(grad Psi / Psi) by central differences of
        # the complex coherent-state product
        h = 1e-6
        for _ in range(50):
            x, y = rng.uniform(-3, 3, 2)
            t = rng.uniform(0.1, 8)
            p0 = eval_psi(two_qubit_mid, x, y, t)
            gx = (eval_psi(two_qubit_mid, x + h, y, t)
                  - eval_psi(two_qubit_mid, x - h, y, t)) / (2 * h)
            gy = (eval_psi(two_qubit_mid, x, y + h, t)
                  - eval_psi(two_qubit_mid, x, y - h, t)) / (2 * h)
            v = velocity(two_qubit_mid, x, y, t)
            assert v.vx == pytest.approx((gx / p0).imag, rel=1e-6, abs=1e-7)
            assert v.vy == pytest.approx((gy / p0).imag, rel=1e-6, abs=1e-7)

    def test_time_reversal(self, two_qubit_mid, rng):
        for _ in range(25):
            x, y = rng.uniform(-3, 3, 2)
            t = rng.uniform(0.1, 8)
            vp = velocity(two_qubit_mid, x, y, t)
            vm = velocity(two_qubit_mid, x, y, -t)
            assert vm.vx == pytest.approx(-vp.vx, rel=1e-12, abs=1e-14)
            assert vm.vy == pytest.approx(-vp.vy, rel=1e-12, abs=1e-14)

    def test_at_node_raises(self, two_qubit_max):
        node = nodal_points(two_qubit_max, 1.5, 3)[0]
        with pytest.raises(AtNode):
            velocity(two_qubit_max, *node.position, 1.5, floor=1e-30)

    def test_single_node_at_node_raises(self, single_node):
        node = nodal_points(single_node, 1.5)[0]
        with pytest.raises(AtNode):
            velocity(single_node, *node.position, 1.5, floor=1e-30)


def fd_jacobian(model, x, y, t, h=1e-6):
    vxp = velocity(model, x + h, y, t)
    vxm = velocity(model, x - h, y, t)
    vyp = velocity(model, x, y + h, t)
    vym = velocity(model, x, y - h, t)
    return np.array([[(vxp.vx - vxm.vx) / (2 * h), (vyp.vx - vym.vx) / (2 * h)],
                     [(vxp.vy - vxm.vy) / (2 * h), (vyp.vy - vym.vy) / (2 * h)]])


class TestJacobian:
    @pytest.mark.parametrize("which", ["two_qubit", "single"])
    def test_matches_finite_differences(self, which, two_qubit_max,
                                        single_node, rng):
        model = two_qubit_max if which == "two_qubit" else single_node
        n = 500
        checked = 0
        while checked < n:
            x, y = rng.uniform(-4, 4, 2)
            t = rng.uniform(0.1, 8)
            if psi_sq(model, x, y, t) < 1e-12:
                continue
            jac = velocity_jacobian(model, x, y, t)
            ref = fd_jacobian(model, x, y, t)
            # the 1e-4 scale floor keeps the FD roundoff noise (~1e-10 with
            # h = 1e-6) from dominating where the Jacobian itself is ~0
            scale = max(np.max(np.abs(jac)), 1e-4)
            assert np.max(np.abs(jac - ref)) < 1e-5 * scale
            checked += 1

    def test_symmetric(self, two_qubit_max, rng):
        # the guidance field is a phase gradient, so its Jacobian is the
        # Hessian of the phase: symmetric at every regular point
        for _ in range(100):
            x, y = rng.uniform(-3, 3, 2)
            t = rng.uniform(0.1, 8)
            jac = velocity_jacobian(two_qubit_max, x, y, t)
            assert jac[0, 1] == pytest.approx(jac[1, 0], rel=1e-9, abs=1e-9)

    def test_product_state_decouples(self):
        m = make_two_qubit(0.0)
        rng = np.random.default_rng(2)
        for _ in range(20):
            x, y = rng.uniform(-3, 3, 2)
            jac = velocity_jacobian(m, x, y, rng.uniform(0.1, 8))
            assert abs(jac[0, 1]) < 1e-14 and abs(jac[1, 0]) < 1e-14


class TestContinuityEquation:
    @pytest.mark.parametrize("which", ["two_qubit", "single"])
    def test_residual(self, which, two_qubit_mid, single_node, rng):
        # d|Psi|^2/dt + div(|Psi|^2 v) = 0, with the density evaluated from
        # the complex wavefunction (independent of the closed-form field)
        model = two_qubit_mid if which == "two_qubit" else single_node
        h = 1e-5

        def rho(x, y, t):
            return abs(eval_psi(model, x, y, t)) ** 2

        def flux_x(x, y, t):
            return rho(x, y, t) * velocity(model, x, y, t).vx

        def flux_y(x, y, t):
            return rho(x, y, t) * velocity(model, x, y, t).vy

        checked = 0
        while checked < 500:
            x, y = rng.uniform(-4, 4, 2)
            t = rng.uniform(0.1, 8)
            if rho(x, y, t) < 1e-10:
                continue
            dt_rho = (rho(x, y, t + h) - rho(x, y, t - h)) / (2 * h)
            div = (flux_x(x + h, y, t) - flux_x(x - h, y, t)) / (2 * h) \
                + (flux_y(x, y + h, t) - flux_y(x, y - h, t)) / (2 * h)
            assert abs(dt_rho + div) < 1e-5
            checked += 1


class TestQuantumPotential:
    def test_diverges_toward_node(self, two_qubit_max):
        t = 1.5
        node = nodal_points(two_qubit_max, t, 3)[0]
        direction = np.array([0.3, 0.95]) / math.hypot(0.3, 0.95)
        qs = [quantum_potential(two_qubit_max,
                                *(node.position + s * direction), t)
              for s in (0.3, 0.1, 0.03, 0.01)]
        assert all(q2 < q1 for q1, q2 in zip(qs, qs[1:]))
        assert qs[-1] < -100

    def test_finite_at_central_y_point(self, two_qubit_max):
        q = quantum_potential(two_qubit_max, 0.0, 0.0, 1.5)
        assert math.isfinite(q)

    def test_single_node_analytic_vs_finite_difference(self, single_node, rng):
        # oracle: 5-point Laplacian of |Psi| from the complex evaluation
        h = 1e-4
        for _ in range(25):
            x, y = rng.uniform(-2, 2, 2)
            t = rng.uniform(0.1, 4)
            if psi_sq(single_node, x, y, t) < 1e-8:
                continue

            def a(dx, dy):
                return abs(eval_psi(single_node, x + dx, y + dy, t))

            lap = (-a(2 * h, 0) + 16 * a(h, 0) - 30 * a(0, 0) + 16 * a(-h, 0)
                   - a(-2 * h, 0)) / (12 * h * h) \
                + (-a(0, 2 * h) + 16 * a(0, h) - 30 * a(0, 0) + 16 * a(0, -h)
                   - a(0, -2 * h)) / (12 * h * h)
            ref = -0.5 * lap / a(0, 0)
            assert quantum_potential(single_node, x, y, t) == pytest.approx(
                ref, rel=1e-5, abs=1e-6)

    def test_at_node_raises(self, two_qubit_max):
        node = nodal_points(two_qubit_max, 1.5, 3)[0]
        with pytest.raises(AtNode):
            quantum_potential(two_qubit_max, *node.position, 1.5, floor=1e-30)
