import math

import numpy as np
import pytest

from bohmflow.critical import (classify_fixed_point, escape_times,
                               find_x_points, nearest_nodal_point,
                               nodal_points, trace_asymptotic_curves,
                               y_points)
from bohmflow.errors import Degenerate, NearEscape, NoConvergence, NotSaddle
from bohmflow.models import (eval_psi, make_two_qubit, quantum_potential,
                             velocity)
from bohmflow._kernels import newton_fixed_point, vel_k
from bohmflow.models import model_kind, model_params

SQRT3 = math.sqrt(3.0)
T_INF = math.pi / (SQRT3 - 1.0)


class TestNodalPoints:
    def test_count_and_order(self, two_qubit_max):
        nodes = nodal_points(two_qubit_max, 1.5, 9)
        assert [n.k for n in nodes] == [-9, -7, -5, -3, -1, 1, 3, 5, 7, 9]

    def test_collinear_through_origin(self, two_qubit_max):
        nodes = nodal_points(two_qubit_max, 1.5, 9)
        pos = np.array([n.position for n in nodes])
        cross = pos[:, 0] * pos[1, 1] - pos[:, 1] * pos[1, 0]
        assert np.max(np.abs(cross)) < 1e-12

    def test_explicit_window(self, two_qubit_max):
        nodes = nodal_points(two_qubit_max, 1.5, [1, 2, 3])
        assert [n.k for n in nodes] == [1, 3]

    def test_nodal_line_slope_early_times(self, two_qubit_max):
        # y/x -> sqrt(omega_x/omega_y) ~ 0.76 as t -> 0+, positions -> +inf
        # for k < 0
        for t in (1e-3, 1e-4):
            node = nodal_points(two_qubit_max, t, [-7], guard=1e-9)[0]
            x, y = node.position
            assert x > 100 and y > 0
            assert y / x == pytest.approx(math.sqrt(1.0 / SQRT3), abs=1e-2)

    def test_escape_guard(self, two_qubit_max):
        with pytest.raises(NearEscape):
            nodal_points(two_qubit_max, T_INF + 1e-8, 5)

    def test_single_node_guard(self, single_node):
        with pytest.raises(NearEscape):
            nodal_points(single_node, math.pi / SQRT3 + 1e-8)

    def test_velocity_is_time_derivative(self, two_qubit_max):
        h = 1e-7
        n0 = nodal_points(two_qubit_max, 1.5 - h, [5])[0]
        n1 = nodal_points(two_qubit_max, 1.5 + h, [5])[0]
        node = nodal_points(two_qubit_max, 1.5, [5])[0]
        fd = (n1.position - n0.position) / (2 * h)
        assert np.allclose(node.velocity, fd, rtol=1e-6, atol=1e-6)

    def test_divergence_near_escape(self, two_qubit_max):
        near = nodal_points(two_qubit_max, T_INF - 1e-4, [3], guard=1e-5)[0]
        mid = nodal_points(two_qubit_max, 2.0, [3])[0]
        assert np.hypot(*near.position) > 100 * np.hypot(*mid.position)

    def test_product_state_has_none(self):
        assert nodal_points(make_two_qubit(0.0), 1.5, 9) == []

    def test_nearest_expansion(self, two_qubit_max):
        node = nearest_nodal_point(two_qubit_max, 1.5, 0.5, 0.0, k_limit=5)
        assert node.k == 1


class TestYPoints:
    def test_central_y_at_origin(self, two_qubit_max):
        yp = [p for p in y_points(two_qubit_max, 1.5, 4) if p.k_prime == 0][0]
        assert np.hypot(*yp.position) < 1e-12

    def test_single_node_y_shares_node_height(self, single_node):
        node = nodal_points(single_node, 1.5)[0]
        yp = y_points(single_node, 1.5)[0]
        assert yp.position[0] == 0.0
        assert yp.position[1] == pytest.approx(node.position[1], abs=1e-14)

    def test_velocity_vanishes(self, two_qubit_max):
        for yp in y_points(two_qubit_max, 1.5, [-2, 2]):
            v = velocity(two_qubit_max, *yp.position, 1.5)
            assert math.hypot(v.vx, v.vy) < 1e-10

    def test_alternation_along_nodal_line(self, two_qubit_max, rng):
        # projected on the nodal line, N and Y alternate: ..., N(k), Y, N(k+2)
        for _ in range(10):
            t = rng.uniform(0.2, 4.0)
            if abs(t - T_INF) < 0.05:
                continue
            nodes = nodal_points(two_qubit_max, t, 11)
            ys = y_points(two_qubit_max, t, 12)
            direction = nodes[1].position - nodes[0].position
            direction = direction / np.hypot(*direction)
            items = [(float(np.dot(n.position, direction)), "N", n.k)
                     for n in nodes]
            items += [(float(np.dot(p.position, direction)), "Y", p.k_prime)
                      for p in ys]
            items.sort()
            kinds = [it[1] for it in items]
            assert all(a != b for a, b in zip(kinds, kinds[1:]))
            idx = [it[2] for it in items]
            assert idx == sorted(idx) or idx == sorted(idx, reverse=True)


class TestXPoints:
    def test_two_per_node_с2_max(self, two_qubit_max):
        t = 1.5
        for k in (-3, -1, 1, 3):
            node = nodal_points(two_qubit_max, t, [k])[0]
            xps = find_x_points(two_qubit_max, t, node)
            assert {xp.side for xp in xps} == {"left", "right"}
            for xp in xps:
                assert xp.residual < 1e-10
                assert xp.classification == "saddle"

    def test_residual_and_idempotence(self, two_qubit_max):
        t = 1.5
        node = nodal_points(two_qubit_max, t, [1])[0]
        kind = model_kind(two_qubit_max)
        p = model_params(two_qubit_max)
        for xp in find_x_points(two_qubit_max, t, node):
            vx, vy = vel_k(kind, p, *xp.position_inertial, t)
            assert math.hypot(vx - node.velocity[0],
                              vy - node.velocity[1]) < 1e-10
            u, v, resid, ok = newton_fixed_point(
                kind, p, t, *node.position, *node.velocity,
                xp.offset[0], xp.offset[1], 1e-10, 1, 0.5)
            assert ok and math.hypot(u - xp.offset[0], v - xp.offset[1]) < 1e-9

    def test_saddle_eigen_structure(self, two_qubit_max):
        node = nodal_points(two_qubit_max, 1.5, [1])[0]
        for xp in find_x_points(two_qubit_max, 1.5, node):
            ev = np.real(xp.eigenvalues)
            assert ev.min() < 0 < ev.max()
            assert np.max(np.abs(np.imag(xp.eigenvalues))) < 1e-10

    def test_left_right_pairing(self, two_qubit_max):
        # at slow nodal speeds the right X of node k is nearer the left X of
        # node k+2 than its own node (both crowd the Y-point between them)
        t = 1.5
        n1 = nodal_points(two_qubit_max, t, [1])[0]
        n3 = nodal_points(two_qubit_max, t, [3])[0]
        right_1 = {xp.side: xp for xp in find_x_points(two_qubit_max, t, n1)}["right"]
        left_3 = {xp.side: xp for xp in find_x_points(two_qubit_max, t, n3)}["left"]
        d_pair = np.hypot(*(right_1.position_inertial - left_3.position_inertial))
        d_own = np.hypot(*(right_1.position_inertial - n1.position))
        assert d_pair < d_own

    def test_quantum_potential_ordering(self, two_qubit_max):
        # X-points sit above the Y-points on the Q surface (central Y aside)
        t = 1.5
        ys = {p.k_prime: p for p in y_points(two_qubit_max, t, 8)}
        for k in (-5, -3, -1, 1, 3, 5):
            node = nodal_points(two_qubit_max, t, [k])[0]
            for xp in find_x_points(two_qubit_max, t, node):
                q_x = quantum_potential(two_qubit_max, *xp.position_inertial, t)
                kp = k - 1 if xp.side == "left" else k + 1
                if kp == 0:
                    continue
                q_y = quantum_potential(two_qubit_max, *ys[kp].position, t)
                assert q_x > q_y

    def test_q_local_max_along_line(self, single_node):
        # the X-point lies at the local maximum of Q along the nodal line
        t = 1.5
        node = nodal_points(single_node, t)[0]
        xp = find_x_points(single_node, t, node)[0]
        yp = y_points(single_node, t)[0]
        d = yp.position - node.position
        d = d / np.hypot(*d)
        q0 = quantum_potential(single_node, *xp.position_inertial, t)
        for s in (-0.02, 0.02):
            q = quantum_potential(single_node,
                                  *(xp.position_inertial + s * d), t)
            assert q < q0

    def test_strict_raises_for_missing_side(self, single_node):
        # the single-node co-moving field has one fixed point, so one side
        # stays empty
        node = nodal_points(single_node, 1.5)[0]
        with pytest.raises(NoConvergence):
            find_x_points(single_node, 1.5, node, strict=True)

    def test_explicit_seeds(self, two_qubit_max):
        node = nodal_points(two_qubit_max, 1.5, [1])[0]
        ref = {xp.side: xp for xp in find_x_points(two_qubit_max, 1.5, node)}
        xps = find_x_points(two_qubit_max, 1.5, node,
                            seeds=[tuple(ref["left"].offset + 0.01)])
        assert len(xps) == 1
        assert np.allclose(xps[0].offset, ref["left"].offset, atol=1e-8)


class TestClassification:
    def test_saddle(self):
        c = classify_fixed_point(np.diag([1.0, -1.0]))
        assert c.kind == "saddle"

    def test_center_like(self):
        c = classify_fixed_point(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert c.kind == "center-like"

    def test_nodes_and_spirals(self):
        assert classify_fixed_point(np.diag([1.0, 2.0])).kind == "unstable-node"
        assert classify_fixed_point(np.diag([-1.0, -2.0])).kind == "stable-node"
        assert classify_fixed_point(
            np.array([[0.1, 1.0], [-1.0, 0.1]])).kind == "unstable-spiral"
        assert classify_fixed_point(
            np.array([[-0.1, 1.0], [-1.0, -0.1]])).kind == "stable-spiral"

    def test_degenerate(self):
        with pytest.raises(Degenerate):
            classify_fixed_point(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestAsymptoticCurves:
    def test_four_curves_never_intersect(self, two_qubit_max):
        t = 1.5
        node = nodal_points(two_qubit_max, t, [1])[0]
        xp = find_x_points(two_qubit_max, t, node)[0]
        curves = trace_asymptotic_curves(two_qubit_max, t, xp,
                                         arc_length=0.6, box=3.0)
        assert len(curves) == 4
        assert all(len(c) > 10 for c in curves)
        # stable vs unstable polylines approach but never touch (skip the
        # shared start neighborhood around the X-point itself)
        for i in (0, 1):
            for j in (2, 3):
                a = curves[i][5:]
                b = curves[j][5:]
                d = np.min(np.hypot(a[:, None, 0] - b[None, :, 0],
                                    a[:, None, 1] - b[None, :, 1]))
                assert d > 0.0

    def test_reversed_flow_returns_to_x_point(self, two_qubit_max):
        from bohmflow._kernels import frozen_comoving_curve
        t = 1.5
        node = nodal_points(two_qubit_max, t, [1])[0]
        xp = find_x_points(two_qubit_max, t, node)[0]
        curves = trace_asymptotic_curves(two_qubit_max, t, xp,
                                         arc_length=0.4, box=3.0)
        start = curves[0][min(40, len(curves[0]) - 1)] + node.position
        pts, n = frozen_comoving_curve(
            model_kind(two_qubit_max), model_params(two_qubit_max), t,
            start[0], start[1], node.velocity[0], node.velocity[1], -1.0,
            1e-3, 4000, 4.0, 5.0)
        d0 = np.hypot(*(start - xp.position_inertial))
        d = np.hypot(pts[:n, 0] - xp.position_inertial[0],
                     pts[:n, 1] - xp.position_inertial[1])
        # the reversed streamline runs back along the unstable branch,
        # passes arbitrarily close to the saddle, and leaves along the
        # other asymptote; convergence shows up as the close approach
        assert d.min() < 0.05 * d0

    def test_frozen_field_vanishes_at_x(self, two_qubit_max):
        t = 1.5
        node = nodal_points(two_qubit_max, t, [1])[0]
        xp = find_x_points(two_qubit_max, t, node)[0]
        v = velocity(two_qubit_max, *xp.position_inertial, t)
        assert math.hypot(v.vx - node.velocity[0],
                          v.vy - node.velocity[1]) < 1e-10

    def test_not_saddle_rejected(self, two_qubit_max):
        node = nodal_points(two_qubit_max, 1.5, [1])[0]
        xp = find_x_points(two_qubit_max, 1.5, node)[0]
        fake = type(xp)(node_k=xp.node_k, side=xp.side, offset=xp.offset,
                        position_inertial=xp.position_inertial,
                        jacobian=np.array([[0.0, 1.0], [-1.0, 0.0]]),
                        eigenvalues=xp.eigenvalues,
                        eigenvectors=xp.eigenvectors, t=xp.t)
        with pytest.raises(NotSaddle):
            trace_asymptotic_curves(two_qubit_max, 1.5, fake)


class TestEscapeTimes:
    def test_sqrt3(self, two_qubit_max):
        ts = escape_times(two_qubit_max, 10.0)
        assert np.allclose(ts, [T_INF, 2 * T_INF], rtol=0, atol=1e-12)
        assert ts[0] == pytest.approx(4.3, abs=0.02)

    def test_short_horizon(self, two_qubit_max):
        assert len(escape_times(two_qubit_max, 1.0)) == 0

    def test_commensurable(self):
        from bohmflow.models import OscillatorFrequencies, TwoQubitModel
        m = TwoQubitModel(c1=1.0, c2=0.0, a0=2.5,
                          frequencies=OscillatorFrequencies(1.0, 2.0))
        assert np.allclose(escape_times(m, 7.0), [math.pi, 2 * math.pi])

    def test_equal_frequencies_rejected(self):
        from bohmflow.models import OscillatorFrequencies, TwoQubitModel
        m = TwoQubitModel(c1=1.0, c2=0.0, a0=2.5,
                          frequencies=OscillatorFrequencies(1.0, 1.0))
        with pytest.raises(ValueError):
            escape_times(m, 10.0)
