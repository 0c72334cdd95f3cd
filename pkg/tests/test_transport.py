import numpy as np
import pytest

from lavdm_kit import (
    SphereCurve,
    SphericalTangentVector,
    double_transport_error,
    great_circle_arc,
    sphere_transport_ode,
)
from lavdm_kit.errors import ChartExit, LavdmError
from lavdm_kit.transport import ambient_to_tangent, tangent_to_ambient

X0 = np.array([1.0, 0.0, 0.0])
Y0 = np.array([0.0, 1.0, 0.0])
Z0 = np.array([1.0, 0.0, 1.0]) / np.sqrt(2)


class TestWorkedExample:
    """Transport of a*d_phi from (pi/2, 0), directly vs through (pi/4, 0)."""

    def test_direct_path_keeps_components(self):
        a = 1.25
        v0 = SphericalTangentVector(0.0, a, (np.pi / 2, 0.0))
        out = sphere_transport_ode(great_circle_arc(X0, Y0), v0, steps=10_000)
        assert abs(out.theta_component) < 1e-10
        assert abs(out.phi_component - a) < 1e-10

    def test_two_leg_path_splits_components(self):
        a = 1.25
        expected = np.sqrt(2) * a / 2
        v0 = SphericalTangentVector(0.0, a, (np.pi / 2, 0.0))
        at_z = sphere_transport_ode(great_circle_arc(X0, Z0), v0, steps=10_000)
        # the vector doubles its phi component on the way up
        assert abs(at_z.phi_component - np.sqrt(2) * a) < 1e-8
        at_y = sphere_transport_ode(great_circle_arc(Z0, Y0), at_z, steps=10_000)
        assert abs(at_y.theta_component - expected) < 1e-6
        assert abs(at_y.phi_component - expected) < 1e-6

    def test_g_norm_preserved(self):
        v0 = SphericalTangentVector(0.3, 0.9, (np.pi / 2, 0.0))
        out = sphere_transport_ode(great_circle_arc(X0, Z0), v0, steps=10_000)
        assert abs(out.g_norm() - v0.g_norm()) < 1e-8


class TestTransportProperties:
    def test_equator_loop_is_identity(self):
        curve = SphereCurve(
            lambda t: (np.pi / 2, 2 * np.pi * t, 0.0, 2 * np.pi), 0.0, 1.0
        )
        v0 = SphericalTangentVector(0.4, -0.7, (np.pi / 2, 0.0))
        out = sphere_transport_ode(curve, v0, steps=5000)
        assert abs(out.theta_component - 0.4) < 1e-12
        assert abs(out.phi_component + 0.7) < 1e-12

    def test_forward_backward_roundtrip(self):
        curve = great_circle_arc(X0, Z0)
        v0 = SphericalTangentVector(0.5, 0.5, (np.pi / 2, 0.0))
        fwd = sphere_transport_ode(curve, v0, steps=4000)
        back = sphere_transport_ode(curve.reverse(), fwd, steps=4000)
        assert abs(back.theta_component - 0.5) < 1e-9
        assert abs(back.phi_component - 0.5) < 1e-9

    def test_midpoint_on_geodesic_splits_exactly(self):
        mid = (X0 + Y0) / np.linalg.norm(X0 + Y0)
        v0 = SphericalTangentVector(0.8, 0.1, (np.pi / 2, 0.0))
        direct = sphere_transport_ode(great_circle_arc(X0, Y0), v0, steps=4000)
        step1 = sphere_transport_ode(great_circle_arc(X0, mid), v0, steps=4000)
        step2 = sphere_transport_ode(great_circle_arc(mid, Y0), step1, steps=4000)
        assert abs(step2.theta_component - direct.theta_component) < 1e-10
        assert abs(step2.phi_component - direct.phi_component) < 1e-10

    def test_chart_exit_at_pole(self):
        top = np.array([0.0, 0.0, 1.0])
        near = np.array([np.sin(0.3), 0.0, np.cos(0.3)])
        start = np.array([np.sin(2.0), 0.0, np.cos(2.0)])
        v0 = SphericalTangentVector(0.0, 1.0, (2.0, 0.0))
        with pytest.raises(ChartExit):
            sphere_transport_ode(
                great_circle_arc(start, -start + 2 * (start @ top) * top), v0, steps=100
            )

    def test_steps_floor(self):
        v0 = SphericalTangentVector(0.0, 1.0, (np.pi / 2, 0.0))
        with pytest.raises(LavdmError):
            sphere_transport_ode(great_circle_arc(X0, Y0), v0, steps=5)

    def test_base_point_margin(self):
        with pytest.raises(LavdmError):
            SphericalTangentVector(1.0, 0.0, (1e-9, 0.0))

    def test_tangent_ambient_roundtrip(self):
        theta, phi = 1.1, 2.7
        w = tangent_to_ambient(theta, phi, 0.3, -1.2)
        vt, vp = ambient_to_tangent(theta, phi, w)
        assert abs(vt - 0.3) < 1e-12 and abs(vp + 1.2) < 1e-12


class TestDoubleTransportError:
    def test_identical_points_zero_error(self):
        # degenerate arcs transport by the identity
        v0 = SphericalTangentVector(0.2, 0.4, (np.pi / 2, 0.0))
        out = sphere_transport_ode(great_circle_arc(X0, X0), v0, steps=100)
        assert out.theta_component == 0.2 and out.phi_component == 0.4

    def test_median_error_decreases(self):
        big = double_transport_error(0.2, 64, seed=0, steps=400)
        small = double_transport_error(0.05, 64, seed=0, steps=400)
        assert 0 < small < big

    def test_modes_differ_in_rate(self):
        pair = [
            double_transport_error(e, 128, seed=1, steps=400) for e in (0.2, 0.025)
        ]
        ball = [
            double_transport_error(e, 128, seed=1, steps=400, pair_separation="sqrt-epsilon")
            for e in (0.2, 0.025)
        ]
        rate_pair = np.log(pair[0] / pair[1]) / np.log(0.2 / 0.025)
        rate_ball = np.log(ball[0] / ball[1]) / np.log(0.2 / 0.025)
        assert rate_pair > rate_ball + 0.25
