"""4-metric assembly, curvature splitting, and the structure checks."""

import numpy as np
import pytest

from sdconformal.jets import JetSpace
from sdconformal.projective import ProjectiveSurface
from sdconformal.pairs import ProjectivePair, dw_quadrature_build
from sdconformal.conformal import (MetricBuilder, curvature_report,
                                   certify_selfdual, killing_report,
                                   frobenius_residual, build_null_kahler,
                                   jet_matrix_inverse, frame_values)

FLAT = ProjectiveSurface.flat()


def _points4(names=("x", "y", "t", "z"), n=6, seed=5):
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(n):
        v = rng.uniform(0.6, 1.4, size=4)
        pts.append(dict(zip(names, v)))
    return pts


class TestJetLinearAlgebra:
    def test_matrix_inverse(self):
        space = JetSpace(("x", "y"), 2)
        env = space.seed({"x": 0.4, "y": -0.3})
        x, y = env["x"], env["y"]
        one = space.constant(1.0)
        zero = space.constant(0.0)
        A = [[one + x * y, x, zero, zero],
             [y, one, zero, zero],
             [zero, zero, one, x * x],
             [x, zero, zero, one + y]]
        Ainv = jet_matrix_inverse(A)
        for i in range(4):
            for j in range(4):
                prod = sum((A[i][k] * Ainv[k][j]).truncate(2)
                           for k in range(4))
                want = 1.0 if i == j else 0.0
                assert abs(prod.value - want) < 1e-13
                assert np.abs(prod.coeffs[1:]).max() < 1e-12


class TestFlatMetric:
    def test_trivial_pair_gives_flat_split_metric(self):
        builder = MetricBuilder(pair=ProjectivePair.trivial())
        for pt in _points4(("x", "y", "w1", "w2"), 4):
            rep = curvature_report(builder.jets(pt), builder.coords,
                                   builder.orientation(pt))
            assert rep["riemann"] < 1e-12
            assert rep["star_defect"] < 1e-12
            assert rep["signature_ok"]

    def test_certifier_passes_the_trivial_scene(self):
        out = certify_selfdual(FLAT, ProjectivePair.trivial(),
                               _points4(("x", "y", "w1", "w2"), 4))
        assert out["pass"]
        assert out["weyl_minus"] < 1e-12


class TestNullKahlerFamily:
    CASES = [
        ("0.3*x + 0.1*y", "0.2*x - 0.4*y", "1 + 0.25*x*z"),
        ("0.4*x", "0", "1"),
        ("0", "0.7", "1 + 0.1*z^2"),
    ]

    @pytest.mark.parametrize("a,c,f", CASES)
    def test_structure_identities(self, a, c, f):
        nk = build_null_kahler(a, c, f)
        pts = _points4(n=5)
        rep = nk["check"](pts)
        assert rep["J_null"] == 0.0
        assert rep["domega"] < 1e-12
        assert rep["compat"] < 1e-10
        assert rep["g_JJ"] < 1e-10
        assert rep["killing"] < 1e-12
        assert rep["omega_antiselfdual"] < 1e-10

    @pytest.mark.parametrize("a,c,f", CASES)
    def test_antiselfdual_weyl_vanishes(self, a, c, f):
        nk = build_null_kahler(a, c, f)
        out = certify_selfdual(nk["surface"], nk["pair"], _points4(n=5),
                               factor=f)
        assert out["pass"]
        assert out["weyl_minus"] < 1e-8

    @pytest.mark.parametrize("a,c,f", [
        ("0", "0.2*x - 0.4*y", "1"),
        ("0.4*x", "0", "1/z^2"),
    ])
    def test_ricci_flat_subfamilies(self, a, c, f):
        nk = build_null_kahler(a, c, f)
        out = certify_selfdual(nk["surface"], nk["pair"], _points4(n=5),
                               factor=f)
        assert out["pass"]
        assert out["ricci"] < 1e-9

    def test_generic_factor_breaks_ricci_flatness(self):
        nk = build_null_kahler("0.3*x + 0.1*y", "0.2*x - 0.4*y",
                               "1 + 0.25*x*z")
        out = certify_selfdual(nk["surface"], nk["pair"], _points4(n=5),
                               factor="1 + 0.25*x*z")
        assert out["pass"]
        assert out["ricci"] > 1e-3


class TestConformalInvariance:
    def test_rescaling_preserves_the_verdict(self):
        nk = build_null_kahler("0.3*x + 0.1*y", "0.2*x - 0.4*y", "1")
        pts = _points4(n=4)
        plain = certify_selfdual(nk["surface"], nk["pair"], pts, factor="1")
        scaled = certify_selfdual(nk["surface"], nk["pair"], pts,
                                  factor="exp(x/4)*(1 + y^2/8)")
        assert plain["pass"] and scaled["pass"]
        assert scaled["weyl_minus"] < 1e-8


class TestOrientation:
    def test_frame_orientation_signs(self):
        nk = build_null_kahler("0.3*x", "0.2*y", "1")
        pt = {"x": 1.0, "y": 1.1, "t": 0.9, "z": 1.2}
        assert nk["metric"].orientation(pt) == -1.0
        dw = dw_quadrature_build(FLAT, "y/x", 0.0, "1", "z")
        assert MetricBuilder(pair=dw).orientation(pt) == 1.0

    def test_frame_values_shape(self):
        dw = dw_quadrature_build(FLAT, "y/x", 0.0, "1", "z")
        M = frame_values(MetricBuilder(pair=dw),
                         {"x": 1.0, "y": 1.3, "t": 0.2, "z": 0.7})
        assert M.shape == (4, 4)
        assert abs(np.linalg.det(M)) > 1e-6


class TestKillingField:
    def test_vertical_translation_is_null_killing(self):
        P = ProjectiveSurface.from_spray("0", "0", "0", "0.5")
        pair = dw_quadrature_build(P, "0", 0.7, "1", "z")
        builder = MetricBuilder(pair=pair)
        rep = killing_report(builder, ("0", "0", "1", "0"), _points4(n=5))
        assert rep["exact_killing"] < 1e-12
        assert rep["null_defect"] < 1e-12
        assert rep["geodesic"] < 1e-10

    def test_twist_tracks_the_twisting_parameter(self):
        P = ProjectiveSurface.from_spray("0", "0", "0", "0.5")
        pts = _points4(n=5)
        twisted = dw_quadrature_build(P, "0", 0.7, "1", "z")
        rep = killing_report(MetricBuilder(pair=twisted),
                             ("0", "0", "1", "0"), pts)
        assert rep["twist_max"] > 1e-3
        # the density is point-to-point proportional to a constant here
        ratios = np.array(rep["twist"])
        assert np.abs(ratios - ratios[0]).max() < 1e-8

    def test_twist_vanishes_without_twisting(self):
        straight = dw_quadrature_build(FLAT, "y/x", 0.0, "1", "z")
        rep = killing_report(MetricBuilder(pair=straight),
                             ("0", "0", "1", "0"), _points4(n=5))
        assert rep["twist_max"] < 1e-12


class TestFrobenius:
    COORDS = ("x", "y", "t", "z")

    def test_null_planes_of_a_certified_pair_are_integrable(self):
        pair = dw_quadrature_build(FLAT, "y/x", 0.0, "1", "z")
        pts = _points4(n=4)
        # the two lam = 0 Lax fields in coordinates (x, y, t, z)
        phi0 = ["0", "0"] + [str(c) for c in pair.phi[0]]
        l1 = ["1", "0"] + [str(c) for c in pair.alpha[0]]
        assert frobenius_residual([phi0, l1], self.COORDS, pts) < 1e-12
        # the vertical plane
        phi1 = ["0", "0"] + [str(c) for c in pair.phi[1]]
        assert frobenius_residual([phi0, phi1], self.COORDS, pts) < 1e-12

    def test_non_integrable_plane_is_flagged(self):
        fields = [["1", "0", "0", "0"], ["0", "1", "x", "0"]]
        res = frobenius_residual(fields, self.COORDS, _points4(n=4))
        assert res > 0.1
