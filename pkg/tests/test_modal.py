import numpy as np
import pytest

from hopfarray.modal import (
    ModalSystem,
    build_modal_system,
    cubic_tensor,
    gram_matrix,
    modal_cache_key,
    refinement_report,
    source_coupling,
)
from hopfarray.quadrature import QuadratureSpec, default_spec, disk_rule, exterior_rule, interior_rule
from hopfarray.spectral import Eigenmode


def _scaled_mode(mode, factor):
    return Eigenmode(
        resonance=mode.resonance,
        density=mode.density.scaled(factor),
        normalization=mode.normalization * factor,
        array=mode.array,
        params=mode.params,
    )


def test_quadrature_weights_recover_areas(six_array):
    quad = default_spec(six_array)
    ep, ew = exterior_rule(six_array, quad)
    ip, iw, idx = interior_rule(six_array, quad)
    x0, x1, y0, y1 = quad.box
    disk_area = np.pi * np.sum(six_array.radii**2)
    assert ew.sum() == pytest.approx((x1 - x0) * (y1 - y0) - disk_area, rel=1e-12)
    assert iw.sum() == pytest.approx(disk_area, rel=1e-12)
    # exterior nodes all strictly outside circles, interior nodes inside
    for c, r in zip(six_array.centers, six_array.radii):
        d = np.hypot(ep[:, 0] - c[0], ep[:, 1] - c[1])
        assert np.all(d > r)
    d = np.hypot(
        ip[:, 0] - six_array.centers[idx, 0], ip[:, 1] - six_array.centers[idx, 1]
    )
    assert np.all(d < six_array.radii[idx])


def test_quadrature_box_contains_everything(six_array):
    quad = default_spec(six_array)
    quad.validate_against(six_array)
    with pytest.raises(ValueError, match="contain"):
        QuadratureSpec(box=(0.0, 10.0, -3.0, 3.0)).validate_against(six_array)


def test_gram_hermitian_positive_definite(six_system):
    g = six_system.gram
    assert np.max(np.abs(g - g.conj().T)) <= 1e-10 * np.max(np.abs(g))
    assert np.linalg.eigvalsh(g).min() > 0
    assert np.max(np.abs(g @ six_system.gram_inverse - np.eye(six_system.n))) <= 1e-8


def test_gram_single_mode_real_positive(single_mode):
    quad = default_spec(single_mode.array)
    g = gram_matrix([single_mode], quad)
    assert g.shape == (1, 1)
    assert g[0, 0].imag == pytest.approx(0.0, abs=1e-12 * abs(g[0, 0]))
    assert g[0, 0].real > 0


def test_gram_refinement_under_doubling(pair_modes):
    quad = default_spec(pair_modes[0].array)
    rep = refinement_report(pair_modes, quad)
    assert rep["gram"] < 1e-6
    assert rep["cubic_tensor"] < 1e-6


def test_gram_parity_orthogonality(pair_modes):
    # symmetric box for the symmetric pair: parity sectors are orthogonal
    arr = pair_modes[0].array
    span = 4.0 * (arr.resonators[1].center[0] + arr.resonators[1].radius)
    quad = default_spec(arr)
    quad = QuadratureSpec(
        box=(-span, span, -span, span),
        ext_order=quad.ext_order,
        panel_size=quad.panel_size,
        ring_radial=quad.ring_radial,
        ring_angular=quad.ring_angular,
        disk_radial=quad.disk_radial,
        disk_angular=quad.disk_angular,
    )
    g = gram_matrix(pair_modes, quad)
    assert abs(g[0, 1]) <= 1e-6 * max(abs(g[0, 0]), abs(g[1, 1]))


def test_source_coupling_is_conjugated_mode_value(six_system):
    src = np.array(six_system.array.source)
    for n, mode in enumerate(six_system.modes):
        assert six_system.source_vec[n] == pytest.approx(
            complex(mode.field(src)).conjugate(), rel=1e-12
        )


def test_source_coupling_conjugate_linear_in_mode(single_mode):
    c = 0.7 - 1.3j
    src = single_mode.array.source
    base = source_coupling([single_mode], src)[0]
    scaled = source_coupling([_scaled_mode(single_mode, c)], src)[0]
    assert scaled == pytest.approx(np.conj(c) * base, rel=1e-12)


def test_source_coupling_far_field_decay(single_mode):
    # the far entries follow the outgoing-kernel envelope; for a complex
    # resonance that is distance^{-1/2} times a slow exponential in Im(k)d
    from hopfarray.cylinder import hankel1

    k = single_mode.resonance.omega / single_mode.params.v
    center = single_mode.array.resonators[0].center[0]
    d1, d2 = 50.0, 200.0
    v1 = abs(source_coupling([single_mode], (-d1, 0.0))[0])
    v2 = abs(source_coupling([single_mode], (-d2, 0.0))[0])
    kernel_ratio = abs(hankel1(0, k * (d2 + center))) / abs(hankel1(0, k * (d1 + center)))
    assert v2 / v1 == pytest.approx(kernel_ratio, rel=0.02)
    # the power-law part alone dominates while |Im k| d is small
    d3, d4 = 20.0, 45.0
    v3 = abs(source_coupling([single_mode], (-d3, 0.0))[0])
    v4 = abs(source_coupling([single_mode], (-d4, 0.0))[0])
    assert v4 / v3 == pytest.approx(np.sqrt(d3 / d4), rel=0.2)


def test_source_coupling_parity_sign_flip(pair_modes):
    left = source_coupling(pair_modes, (-6.0, 0.0))
    right = source_coupling(pair_modes, (6.0, 0.0))
    for n, mode in enumerate(pair_modes):
        pts = np.array([[0.5, 1.0]])
        u = complex(mode.field(pts)[0])
        ur = complex(mode.field(pts * [-1.0, 1.0])[0])
        parity = 1.0 if abs(u - ur) < abs(u + ur) else -1.0
        assert right[n] == pytest.approx(parity * left[n], rel=1e-6)


def test_source_on_boundary_rejected(single_mode):
    with pytest.raises(ValueError, match="boundary"):
        source_coupling([single_mode], (2.0, 0.0))


def test_cubic_tensor_diagonal_real_positive(single_mode):
    quad = default_spec(single_mode.array)
    T = cubic_tensor([single_mode], quad)
    val = T[0, 0, 0, 0]
    assert val.imag == pytest.approx(0.0, abs=1e-14 * abs(val))
    assert val.real > 0
    # matches the direct interior integral of |u|^4
    pts, wts = disk_rule(single_mode.array.resonators[0].center, 1.0, 24, 48)
    direct = np.sum(wts * np.abs(single_mode.field(pts)) ** 4)
    assert val.real == pytest.approx(direct, rel=1e-10)


def test_cubic_tensor_pair_symmetry_exact(six_system):
    T = six_system.cubic_tensor
    assert np.array_equal(T, T.transpose(0, 2, 1, 3))


def test_cubic_tensor_conjugation_pairing(six_system):
    T = six_system.cubic_tensor
    rng = np.random.default_rng(11)
    for _ in range(20):
        i, j, k, n = rng.integers(0, six_system.n, 4)
        assert T[n, i, j, k] == pytest.approx(np.conj(T[j, k, n, i]), rel=1e-10, abs=1e-14)


def test_pairing_linearity_under_scaling(pair_modes):
    quad = default_spec(pair_modes[0].array)
    c = 1.3 + 0.4j
    T = cubic_tensor(pair_modes, quad)
    scaled = cubic_tensor([_scaled_mode(pair_modes[0], c), pair_modes[1]], quad)
    # first slot enters linearly: T[n, 0, 1, k] gains a factor c when mode 0
    # is scaled in slot i, conj(c) in slot k, etc.
    assert scaled[1, 0, 1, 1] == pytest.approx(c * T[1, 0, 1, 1], rel=1e-10)
    assert scaled[1, 1, 1, 0] == pytest.approx(np.conj(c) * T[1, 1, 1, 0], rel=1e-10)
    assert scaled[0, 1, 1, 1] == pytest.approx(np.conj(c) * T[0, 1, 1, 1], rel=1e-10)
    assert scaled[1, 0, 0, 1] == pytest.approx(c * c * T[1, 0, 0, 1], rel=1e-10)


def test_modal_system_serialization_roundtrip(six_system):
    text = six_system.to_json()
    restored = ModalSystem.from_json(text)
    assert np.array_equal(restored.omegas, six_system.omegas)
    assert np.array_equal(restored.gram, six_system.gram)
    assert np.array_equal(restored.gram_inverse, six_system.gram_inverse)
    assert np.array_equal(restored.source_vec, six_system.source_vec)
    assert np.array_equal(restored.cubic_tensor, six_system.cubic_tensor)
    for a, b in zip(restored.modes, six_system.modes):
        assert np.array_equal(a.density.psi, b.density.psi)
        assert np.array_equal(a.density.phi, b.density.phi)
    # a second serialization is byte-identical
    assert restored.to_json() == text


def test_modal_cache_key_sensitivity(six_system):
    key = modal_cache_key(six_system.array, six_system.params, 5, six_system.quad)
    assert key == modal_cache_key(six_system.array, six_system.params, 5, six_system.quad)
    assert key != modal_cache_key(six_system.array, six_system.params, 7, six_system.quad)
    assert key != modal_cache_key(
        six_system.array, six_system.params, 5, six_system.quad.refine(2)
    )


def test_build_modal_system_reuses_given_modes(pair_modes, pair_system, params):
    rebuilt = build_modal_system(pair_modes[0].array, params, M=5, modes=pair_modes)
    assert np.array_equal(rebuilt.gram, pair_system.gram)
    assert np.array_equal(rebuilt.cubic_tensor, pair_system.cubic_tensor)
