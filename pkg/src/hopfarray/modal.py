"""Projection of the wave problem onto the resonant-mode basis.

Everything the coupled amplitude equations need: the Gram matrix of mode
overlaps over the box Q, the source-coupling vector (the point mass pairs
with a mode through the conjugated mode value at the source), and the
rank-4 tensor of cubic interior products

    T[n, i, j, k] = integral_D  u_i u_j conj(u_k) conj(u_n) dx,

stored symmetrized in (i, j). A ModalSystem bundles these with the modes
themselves and is JSON-serializable so parameter sweeps can skip the
spectral and quadrature work.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .boundary import MultipoleDensity, WaveParams
from .geometry import Resonator, ResonatorArray
from .quadrature import QuadratureSpec, default_spec, exterior_rule, interior_rule
from .spectral import Eigenmode, Resonance, extract_eigenmode, find_resonances


def _mode_values(modes: list[Eigenmode], points: np.ndarray) -> np.ndarray:
    """(N_modes, P) matrix of mode values at the given points."""
    return np.array([m.field(points) for m in modes])


def gram_matrix(modes: list[Eigenmode], quad: QuadratureSpec) -> np.ndarray:
    """Hermitian positive-definite matrix of mode overlaps over the box.

    Entry (i, j) approximates the integral of u_i conj(u_j) over Q by the
    composite exterior + interior rule. The result is Hermitized exactly;
    a non-positive-definite outcome (quadrature too coarse, or dependent
    modes) raises ValueError.
    """
    if not modes:
        raise ValueError("need at least one mode")
    array = modes[0].array
    ext_pts, ext_wts = exterior_rule(array, quad)
    int_pts, int_wts, _ = interior_rule(array, quad)
    pts = np.vstack([ext_pts, int_pts])
    wts = np.concatenate([ext_wts, int_wts])
    U = _mode_values(modes, pts)
    gram = (U * wts[None, :]) @ U.conj().T
    gram = 0.5 * (gram + gram.conj().T)
    eigenvalues = np.linalg.eigvalsh(gram)
    if eigenvalues.min() <= 0:
        raise ValueError(
            f"mode Gram matrix is not positive definite (min eigenvalue "
            f"{eigenvalues.min():.3g}); refine the quadrature or check the modes"
        )
    return gram


def source_coupling(modes: list[Eigenmode], source) -> np.ndarray:
    """Pairing of a unit point mass at the source with each mode.

    The sifting property gives entry n = conj(u_n(source)). The source
    must lie strictly outside every circle.
    """
    if not modes:
        raise ValueError("need at least one mode")
    array = modes[0].array
    for idx, r in enumerate(array.resonators):
        d = np.hypot(source[0] - r.center[0], source[1] - r.center[1])
        if abs(d - r.radius) <= 1e-12 * max(r.radius, 1.0):
            raise ValueError(f"source {tuple(source)} lies on the boundary of resonator {idx}")
    point = np.asarray(source, dtype=float)
    return np.array([complex(m.field(point)).conjugate() for m in modes])


def cubic_tensor(modes: list[Eigenmode], quad: QuadratureSpec) -> np.ndarray:
    """Rank-4 tensor of interior cubic products, symmetrized in (i, j)."""
    if not modes:
        raise ValueError("need at least one mode")
    array = modes[0].array
    pts, wts, _ = interior_rule(array, quad)
    U = _mode_values(modes, pts)
    return cubic_tensor_from_values(U, wts)


def cubic_tensor_from_values(U: np.ndarray, wts: np.ndarray) -> np.ndarray:
    """Tensor T[n,i,j,k] = sum_p w_p U_i U_j conj(U_k) conj(U_n)."""
    n = U.shape[0]
    A = np.einsum("ip,jp->ijp", U, U).reshape(n * n, -1)
    B = np.einsum("kp,np->knp", U.conj(), U.conj() * wts[None, :]).reshape(n * n, -1)
    T = (A @ B.T).reshape(n, n, n, n)  # indices (i, j, k, n)
    T = np.transpose(T, (3, 0, 1, 2))  # -> (n, i, j, k)
    return 0.5 * (T + T.transpose(0, 2, 1, 3))


@dataclass
class ModalSystem:
    """Everything the projected amplitude equations need.

    omegas are the N complex resonances, gram/gram_inverse the mode overlap
    matrix over Q and its inverse, source_vec the point-mass pairings and
    cubic_tensor the interior cubic products. The modes themselves are kept
    so response fields can be evaluated at arbitrary points.
    """

    array: ResonatorArray
    params: WaveParams
    quad: QuadratureSpec
    modes: list[Eigenmode]
    omegas: np.ndarray
    gram: np.ndarray
    gram_inverse: np.ndarray
    source_vec: np.ndarray
    cubic_tensor: np.ndarray
    _interior_cache: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.omegas)

    @property
    def source_gain(self) -> np.ndarray:
        """Vector g with g_m = sum_n [gram^{-1}]_{n,m} source_vec_n."""
        return self.gram_inverse.T @ self.source_vec

    def project(self, vec: np.ndarray) -> np.ndarray:
        """Apply the transposed Gram inverse (the modal deprojection)."""
        return self.gram_inverse.T @ vec

    def mode_fields_at(self, points, side: str | None = None) -> np.ndarray:
        """(N, P) matrix of mode values at the given points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.array([m.field(pts, side=side) for m in self.modes])

    def interior_quadrature(self):
        """(points, weights, disk index, mode values) over the disk interiors."""
        if self._interior_cache is None:
            pts, wts, idx = interior_rule(self.array, self.quad)
            U = _mode_values(self.modes, pts)
            self._interior_cache = (pts, wts, idx, U)
        return self._interior_cache

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "array": {
                "resonators": [[r.center[0], r.center[1], r.radius] for r in self.array.resonators],
                "source": list(self.array.source),
                "grading_factor": self.array.grading_factor,
            },
            "params": {
                "v": self.params.v,
                "v_b": self.params.v_b,
                "delta": self.params.delta,
                "tau": self.params.tau,
            },
            "quad": {
                "box": list(self.quad.box),
                "ext_order": self.quad.ext_order,
                "panel_size": self.quad.panel_size,
                "ring_radial": self.quad.ring_radial,
                "ring_angular": self.quad.ring_angular,
                "disk_radial": self.quad.disk_radial,
                "disk_angular": self.quad.disk_angular,
            },
            "resonances": [
                {
                    "omega": [m.resonance.omega.real, m.resonance.omega.imag],
                    "residual": m.resonance.residual,
                    "truncation": m.resonance.truncation,
                }
                for m in self.modes
            ],
            "normalizations": [[m.normalization.real, m.normalization.imag] for m in self.modes],
            "densities": [
                {
                    "psi": _complex_to_list(m.density.psi),
                    "phi": _complex_to_list(m.density.phi),
                }
                for m in self.modes
            ],
            "gram": _complex_to_list(self.gram),
            "gram_inverse": _complex_to_list(self.gram_inverse),
            "source_vec": _complex_to_list(self.source_vec),
            "cubic_tensor": _complex_to_list(self.cubic_tensor),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModalSystem":
        if data.get("version") != 1:
            raise ValueError(f"unsupported modal cache version {data.get('version')}")
        arr = ResonatorArray(
            resonators=tuple(
                Resonator(center=(c[0], c[1]), radius=c[2]) for c in data["array"]["resonators"]
            ),
            source=tuple(data["array"]["source"]),
            grading_factor=data["array"]["grading_factor"],
        )
        params = WaveParams(**data["params"])
        quad = QuadratureSpec(box=tuple(data["quad"]["box"]), **{
            k: data["quad"][k]
            for k in ("ext_order", "panel_size", "ring_radial", "ring_angular", "disk_radial", "disk_angular")
        })
        modes = []
        for res_d, norm, dens in zip(data["resonances"], data["normalizations"], data["densities"]):
            resonance = Resonance(
                omega=complex(*res_d["omega"]),
                residual=res_d["residual"],
                truncation=res_d["truncation"],
            )
            density = MultipoleDensity(
                psi=_list_to_complex(dens["psi"]), phi=_list_to_complex(dens["phi"])
            )
            modes.append(
                Eigenmode(
                    resonance=resonance,
                    density=density,
                    normalization=complex(*norm),
                    array=arr,
                    params=params,
                )
            )
        return cls(
            array=arr,
            params=params,
            quad=quad,
            modes=modes,
            omegas=np.array([m.resonance.omega for m in modes]),
            gram=_list_to_complex(data["gram"]),
            gram_inverse=_list_to_complex(data["gram_inverse"]),
            source_vec=_list_to_complex(data["source_vec"]),
            cubic_tensor=_list_to_complex(data["cubic_tensor"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModalSystem":
        return cls.from_dict(json.loads(text))


def _complex_to_list(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return {"shape": list(a.shape), "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}


def _list_to_complex(d) -> np.ndarray:
    re = np.array(d["re"], dtype=float)
    im = np.array(d["im"], dtype=float)
    return (re + 1j * im).reshape(d["shape"])


def modal_cache_key(
    array: ResonatorArray, params: WaveParams, M: int, quad: QuadratureSpec
) -> str:
    """Content hash identifying a ModalSystem computation."""
    payload = {
        "resonators": [[r.center[0], r.center[1], r.radius] for r in array.resonators],
        "source": list(array.source),
        "params": [params.v, params.v_b, params.delta],
        "M": M,
        "quad": [
            list(quad.box),
            quad.ext_order,
            quad.panel_size,
            quad.ring_radial,
            quad.ring_angular,
            quad.disk_radial,
            quad.disk_angular,
        ],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def build_modal_system(
    array: ResonatorArray,
    params: WaveParams,
    M: int = 5,
    quad: QuadratureSpec | None = None,
    search: dict | None = None,
    modes: list[Eigenmode] | None = None,
) -> ModalSystem:
    """Full pipeline: resonances -> eigenmodes -> projection quantities."""
    if quad is None:
        quad = default_spec(array)
    if modes is None:
        resonances = find_resonances(array, params, M=M, search=search)
        modes = [extract_eigenmode(array, params, r) for r in resonances]
    gram = gram_matrix(modes, quad)
    gram_inverse = np.linalg.inv(gram)
    return ModalSystem(
        array=array,
        params=params,
        quad=quad,
        modes=modes,
        omegas=np.array([m.resonance.omega for m in modes]),
        gram=gram,
        gram_inverse=gram_inverse,
        source_vec=source_coupling(modes, array.source),
        cubic_tensor=cubic_tensor(modes, quad),
    )


def refinement_report(modes: list[Eigenmode], quad: QuadratureSpec) -> dict[str, float]:
    """Max relative change of each projected quantity under node doubling."""
    fine = quad.refine(2)
    g0, g1 = gram_matrix(modes, quad), gram_matrix(modes, fine)
    t0, t1 = cubic_tensor(modes, quad), cubic_tensor(modes, fine)
    return {
        "gram": float(np.max(np.abs(g1 - g0)) / np.max(np.abs(g1))),
        "cubic_tensor": float(np.max(np.abs(t1 - t0)) / np.max(np.abs(t1))),
    }
