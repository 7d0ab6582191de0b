import numpy as np
import pytest
from scipy.ndimage import map_coordinates

from evflow.flow import (FlowField, FlowParams, compute_flow,
                         polynomial_expansion, subsample_flow)

PARAMS = FlowParams()
INTERIOR = (slice(24, -24), slice(24, -24))


def wls_quadratic_oracle(img, y0, x0, n, sigma):
    """Independent dense weighted least-squares fit of
    c + bx*x + by*y + axx*x^2 + ayy*y^2 + axy*x*y on the clamped patch."""
    offs = np.arange(-n, n + 1)
    u, v = np.meshgrid(offs, offs)  # u: x offset, v: y offset
    ys = np.clip(y0 + v, 0, img.shape[0] - 1)
    xs = np.clip(x0 + u, 0, img.shape[1] - 1)
    f = img[ys, xs].ravel()
    w = (np.exp(-(u ** 2) / (2 * sigma ** 2)) * np.exp(-(v ** 2) / (2 * sigma ** 2))).ravel()
    u = u.ravel().astype(float)
    v = v.ravel().astype(float)
    design = np.stack([np.ones_like(u), u, v, u * u, v * v, u * v], axis=1)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], f * sw, rcond=None)
    return {"c": coef[0], "bx": coef[1], "by": coef[2],
            "axx": coef[3], "ayy": coef[4], "axy": coef[5]}


class TestPolynomialExpansion:
    def test_constant_image(self):
        e = polynomial_expansion(np.full((20, 24), 7.25), 5, 1.1)
        inner = (slice(6, -6), slice(6, -6))
        assert np.allclose(e.c[inner], 7.25, atol=1e-10)
        for ch in (e.bx, e.by, e.axx, e.ayy, e.axy):
            assert np.allclose(ch[inner], 0.0, atol=1e-10)

    def test_linear_ramp(self):
        X = np.tile(np.arange(30, dtype=float), (30, 1))
        e = polynomial_expansion(3.0 * X, 5, 1.1)
        inner = (slice(6, -6), slice(6, -6))
        assert np.allclose(e.bx[inner], 3.0, atol=1e-9)
        assert np.allclose(e.by[inner], 0.0, atol=1e-9)
        assert np.allclose(e.axx[inner], 0.0, atol=1e-9)

    def test_pure_quadratic(self):
        X = np.tile(np.arange(30, dtype=float), (30, 1))
        e = polynomial_expansion(X ** 2, 5, 1.1)
        inner = (slice(6, -6), slice(6, -6))
        assert np.all(e.axx[inner] > 0)
        assert np.allclose(e.axx[inner], 1.0, atol=1e-9)
        assert np.allclose(e.axy[inner], 0.0, atol=1e-9)
        assert np.allclose(e.ayy[inner], 0.0, atol=1e-9)

    @pytest.mark.parametrize("pixel", [(10, 11), (15, 20), (8, 25), (22, 7), (16, 16)])
    def test_against_independent_wls_solve(self, pixel, noise_image):
        img = noise_image((32, 36), seed=9)
        n, sigma = 5, 1.1
        e = polynomial_expansion(img, n, sigma)
        y0, x0 = pixel
        oracle = wls_quadratic_oracle(img, y0, x0, n, sigma)
        got = {"c": e.c[y0, x0], "bx": e.bx[y0, x0], "by": e.by[y0, x0],
               "axx": e.axx[y0, x0], "ayy": e.ayy[y0, x0], "axy": e.axy[y0, x0]}
        for key, want in oracle.items():
            assert got[key] == pytest.approx(want, abs=1e-8), key

    def test_border_uses_clamped_patch(self, noise_image):
        img = noise_image((32, 36), seed=10)
        e = polynomial_expansion(img, 5, 1.1)
        oracle = wls_quadratic_oracle(img, 0, 0, 5, 1.1)
        assert e.c[0, 0] == pytest.approx(oracle["c"], abs=1e-8)
        assert e.bx[0, 0] == pytest.approx(oracle["bx"], abs=1e-8)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            polynomial_expansion(np.zeros((0, 4)), 5, 1.1)


class TestComputeFlow:
    def test_identity_pair(self, noise_image):
        img = noise_image()
        field = compute_flow(img, img, PARAMS, 0.033)
        mag = np.hypot(field.u, field.v)[field.valid]
        assert mag.mean() < 0.05

    @pytest.mark.parametrize("shift", [1, 2, 3, 5])
    def test_integer_shift_oracle(self, shift, noise_image):
        img = noise_image()
        field = compute_flow(img, np.roll(img, shift, axis=1), PARAMS, 0.033)
        assert abs(field.u[INTERIOR].mean() - shift) < 0.2
        assert abs(field.v[INTERIOR].mean()) < 0.2

    def test_vertical_shift(self, noise_image):
        img = noise_image()
        field = compute_flow(img, np.roll(img, 2, axis=0), PARAMS, 0.033)
        assert abs(field.v[INTERIOR].mean() - 2) < 0.2
        assert abs(field.u[INTERIOR].mean()) < 0.2

    def test_rotation_against_analytic_field(self, noise_image):
        img = noise_image()
        h, w = img.shape
        cy, cx = (h - 1) / 2, (w - 1) / 2
        ang = 0.02
        Y, X = np.mgrid[0:h, 0:w].astype(float)
        c, s = np.cos(ang), np.sin(ang)
        rot = map_coordinates(img, [cy - (X - cx) * s + (Y - cy) * c,
                                    cx + (X - cx) * c + (Y - cy) * s],
                              order=3, mode="nearest")
        field = compute_flow(img, rot, PARAMS, 0.033)
        u_true = -ang * (Y - cy)
        v_true = ang * (X - cx)
        epe = np.hypot(field.u - u_true, field.v - v_true)[INTERIOR]
        assert epe.mean() < 0.3

    def test_uniform_image_all_invalid(self):
        field = compute_flow(np.full((64, 64), 9.0), np.full((64, 64), 9.0), PARAMS, 0.01)
        assert field.valid.sum() == 0

    def test_determinism(self, noise_image):
        img = noise_image()
        nxt = np.roll(img, 2, axis=0)
        a = compute_flow(img, nxt, PARAMS, 0.01)
        b = compute_flow(img, nxt, PARAMS, 0.01)
        assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
        assert np.array_equal(a.valid, b.valid)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compute_flow(np.zeros((10, 10)), np.zeros((10, 12)), PARAMS, 0.01)

    def test_invalid_dt(self, noise_image):
        img = noise_image((32, 32))
        with pytest.raises(ValueError):
            compute_flow(img, img, PARAMS, 0.0)


class TestSubsampleFlow:
    def make_field(self, h=4, w=4, u=1.0, v=0.0):
        return FlowField(u=np.full((h, w), u), v=np.full((h, w), v),
                         valid=np.ones((h, w), dtype=bool), dt=0.033)

    def test_stride_grid(self):
        p, q = subsample_flow(self.make_field(), stride=2)
        assert p.shape == (4, 2)
        assert np.allclose(q - p, [1.0, 0.0])
        assert set(map(tuple, p)) == {(0, 0), (2, 0), (0, 2), (2, 2)}

    def test_mask_removes_point(self):
        field = self.make_field()
        field.valid[2, 0] = False
        p, q = subsample_flow(field, stride=2)
        assert p.shape == (3, 2)
        assert (0.0, 2.0) not in set(map(tuple, p))

    def test_stride_one_cardinality(self):
        p, _ = subsample_flow(self.make_field(h=6, w=5), stride=1)
        assert p.shape == (30, 2)

    def test_empty_when_all_invalid(self):
        field = FlowField(u=np.zeros((4, 4)), v=np.zeros((4, 4)),
                          valid=np.zeros((4, 4), dtype=bool), dt=0.01)
        p, q = subsample_flow(field, stride=1)
        assert p.shape == (0, 2) and q.shape == (0, 2)

    def test_bad_stride(self):
        with pytest.raises(ValueError):
            subsample_flow(self.make_field(), stride=0)
