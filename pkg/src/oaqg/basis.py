"""Galerkin bases for the channel: modes, eigenvalues, interaction tensors.

Geometry is the rectangle [0, L] x [0, alpha L]. The atmosphere basis is
zonally periodic and vanishes on the channel walls y = 0, alpha L; the ocean
(and ocean temperature) basis is a double sine vanishing on all four sides.
Both families therefore satisfy phi = 0 and Lap phi = 0 (eigenfunctions) on
their respective boundaries exactly. This wall-clamped choice is NOT the
free-boundary eigenbasis used by the historical low-order coupled models, so
trajectories are not expected to match published runs from those models even
at identical parameters; it is the right basis for the Dirichlet boundary
conditions solved here.

Internally everything is nondimensional: x_hat = pi x / L in [0, pi],
y_hat in [0, alpha pi], and -Laplacian eigenvalues
(2k)^2 + (n/alpha)^2 (atmosphere), m^2 + (n/alpha)^2 (ocean). SI eigenvalues
are these divided by ell^2 = (L/pi)^2.

Interaction tensors are computed by exact analytic product-trig integrals
(complex-exponential expansion; every triple integral of cos/sin factors on
[0, pi] reduces to pi or 2/Q terms), so the Galerkin Jacobian has no
quadrature error at all. The quartic radiation terms are the only place a
collocation grid appears (see Model); quadratic terms never touch a grid.
"""

import math
from dataclasses import dataclass

import numpy as np

from .params import PhysicalParams, ParamError

COS, SIN = 0, 1


class ResolutionError(ParamError):
    """Requested truncation exceeds the configured tensor memory cap."""


@dataclass(frozen=True)
class ResolutionSpec:
    """Truncation: zonal/meridional atmosphere counts, ocean counts.

    The atmosphere keeps the k = 0 zonally uniform column plus cos/sin pairs
    for k = 1..k_zonal, so it carries (2 k_zonal + 1) * n_merid modes.
    """

    k_zonal: int = 8
    n_merid: int = 8
    m_ocn: int = 8
    p_ocn: int = 8

    def __post_init__(self):
        for name in ("k_zonal", "n_merid", "m_ocn", "p_ocn"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ParamError(f"[numerics] resolution.{name}: must be an "
                                 f"integer >= 1, got {v!r}")

    @property
    def n_atm(self) -> int:
        return (2 * self.k_zonal + 1) * self.n_merid

    @property
    def n_ocn(self) -> int:
        return self.m_ocn * self.p_ocn

    @classmethod
    def parse(cls, text: str) -> "ResolutionSpec":
        """Parse 'KxN/MxP', e.g. '8x8/8x8'."""
        try:
            atm, ocn = text.strip().split("/")
            k, n = (int(s) for s in atm.lower().split("x"))
            m, p = (int(s) for s in ocn.lower().split("x"))
        except (ValueError, AttributeError):
            raise ParamError(
                f"[numerics] resolution: expected 'KxN/MxP', got {text!r}")
        return cls(k, n, m, p)

    def __str__(self):
        return (f"{self.k_zonal}x{self.n_merid}/"
                f"{self.m_ocn}x{self.p_ocn}")


class ModeFamily:
    """One orthonormal trig family: per-mode x/y atoms and eigenvalues."""

    def __init__(self, name, labels, xkind, xq, yn, norm, alpha):
        self.name = name
        self.labels = labels          # list of label tuples
        self.xkind = xkind            # COS/SIN per mode
        self.xq = xq                  # zonal frequency in x_hat units
        self.yn = yn                  # meridional index (y factor sin(n y/alpha))
        self.norm = norm              # L2 normalization on the nondim domain
        self.alpha = alpha
        self.lam = xq.astype(float) ** 2 + (yn / alpha) ** 2  # nondim -Lap eigenvalue
        self.index = {lab: i for i, lab in enumerate(labels)}

    def __len__(self):
        return len(self.labels)

    def evaluate(self, x, y):
        """Evaluation matrix E[point, mode] on flat nondim coordinates."""
        xf = np.where(self.xkind[None, :] == COS,
                      np.cos(np.outer(x, self.xq)),
                      np.sin(np.outer(x, self.xq)))
        yf = np.sin(np.outer(y, self.yn) / self.alpha)
        return self.norm[None, :] * xf * yf


def _atm_family(res: ResolutionSpec, alpha: float) -> ModeFamily:
    labels, xkind, xq, yn, norm = [], [], [], [], []
    amp0 = math.sqrt(2.0 / (alpha * math.pi ** 2))
    amp = 2.0 / (math.pi * math.sqrt(alpha))
    for k in range(0, res.k_zonal + 1):
        for par in ((COS,) if k == 0 else (COS, SIN)):
            for n in range(1, res.n_merid + 1):
                labels.append((k, n, par))
                xkind.append(par)
                xq.append(2 * k)
                yn.append(n)
                norm.append(amp0 if k == 0 else amp)
    return ModeFamily("atm", labels, np.array(xkind), np.array(xq),
                      np.array(yn), np.array(norm), alpha)


def _ocn_family(res: ResolutionSpec, alpha: float) -> ModeFamily:
    labels, xq, yn = [], [], []
    for m in range(1, res.m_ocn + 1):
        for n in range(1, res.p_ocn + 1):
            labels.append((m, n))
            xq.append(m)
            yn.append(n)
    count = len(labels)
    amp = 2.0 / (math.pi * math.sqrt(alpha))
    return ModeFamily("ocn", labels, np.full(count, SIN), np.array(xq),
                      np.array(yn), np.full(count, amp), alpha)


# ---------------------------------------------------------------------------
# exact trig integrals on [0, pi] via complex exponentials
# ---------------------------------------------------------------------------
# cos(qu) = (E_q + E_-q)/2, sin(qu) = (E_q - E_-q)/(2i) with E_q = e^{iqu};
# int_0^pi E_Q du = pi (Q = 0), 2i/Q (Q odd), 0 (Q even nonzero).

def _exp_coeff(kind, sign):
    """Coefficient of e^{i sign q u} in the kind's expansion."""
    return np.where(kind == COS, 0.5 + 0.0j, -sign * 0.5j)


def _exp_integral(Q):
    Qs = np.where(Q == 0, 1, Q)
    odd = (Q % 2) != 0
    out = np.where(odd, 2.0j / Qs, 0.0 + 0.0j)
    return np.where(Q == 0, math.pi + 0.0j, out)


def _triple(k1, q1, k2, q2, k3, q3):
    """int_0^pi trig(q1 u) trig(q2 u) trig(q3 u) du, broadcasting."""
    out = 0.0
    for s1 in (1, -1):
        c1 = _exp_coeff(k1, s1)
        for s2 in (1, -1):
            c12 = c1 * _exp_coeff(k2, s2)
            for s3 in (1, -1):
                Q = s1 * q1 + s2 * q2 + s3 * q3
                out = out + c12 * _exp_coeff(k3, s3) * _exp_integral(Q)
    return np.real(out)


def _pair(k1, q1, k2, q2):
    """int_0^pi trig(q1 u) trig(q2 u) du, broadcasting."""
    out = 0.0
    for s1 in (1, -1):
        c1 = _exp_coeff(k1, s1)
        for s2 in (1, -1):
            Q = s1 * q1 + s2 * q2
            out = out + c1 * _exp_coeff(k2, s2) * _exp_integral(Q)
    return np.real(out)


def _x_derivative(kind, q):
    """d/du of a trig atom: kind flips, coefficient is -q (cos) / +q (sin)."""
    coef = np.where(kind == COS, -q.astype(float), q.astype(float))
    return 1 - kind, coef


class SparseTriple:
    """Sparse (i, j, l) -> value tensor with a fixed-order contraction.

    apply(u, v)[l] = sum_ij T[i,j,l] u[i] v[j]; the reduction is a bincount
    over precomputed flat indices, so summation order is fixed and runs are
    bit-reproducible.
    """

    def __init__(self, i, j, l, v, n_out):
        self.i = i.astype(np.int32)
        self.j = j.astype(np.int32)
        self.l = l.astype(np.int64)
        self.v = v
        self.n_out = n_out

    @property
    def nnz(self):
        return self.v.size

    def apply(self, u, v):
        w = self.v * u[self.i] * v[self.j]
        return np.bincount(self.l, weights=w, minlength=self.n_out)


def _jacobian_tensor(fu: ModeFamily, fv: ModeFamily, fw: ModeFamily,
                     block=48, threshold=1e-12) -> SparseTriple:
    """T[i,j,l] = int J(phi_i, phi_j) phi_l over the nondim domain.

    J picks up one x-derivative and one y-derivative per term; the y measure
    contributes alpha and each y-derivative 1/alpha, so y factors appear with
    plain integer weights n.
    """
    dxk_u, dxc_u = _x_derivative(fu.xkind, fu.xq)
    dxk_v, dxc_v = _x_derivative(fv.xkind, fv.xq)
    n_u, n_v = fu.yn.astype(float), fv.yn.astype(float)

    iu = np.arange(len(fu))[:, None, None]
    jv = np.arange(len(fv))[None, :, None]
    rows_i, rows_j, rows_l, vals = [], [], [], []
    for start in range(0, len(fw), block):
        sl = slice(start, min(start + block, len(fw)))
        lw = np.arange(start, sl.stop)[None, None, :]
        xw_k = fw.xkind[None, None, sl]
        xw_q = fw.xq[None, None, sl]
        yw = fw.yn[None, None, sl]

        ix1 = _triple(dxk_u[:, None, None], fu.xq[:, None, None],
                      fv.xkind[None, :, None], fv.xq[None, :, None],
                      xw_k, xw_q)
        iy1 = _triple(np.full((1, 1, 1), SIN), fu.yn[:, None, None],
                      np.full((1, 1, 1), COS), fv.yn[None, :, None],
                      np.full((1, 1, 1), SIN), yw)
        term = (dxc_u[:, None, None] * ix1) * (n_v[None, :, None] * iy1)

        ix2 = _triple(fu.xkind[:, None, None], fu.xq[:, None, None],
                      dxk_v[None, :, None], fv.xq[None, :, None],
                      xw_k, xw_q)
        iy2 = _triple(np.full((1, 1, 1), COS), fu.yn[:, None, None],
                      np.full((1, 1, 1), SIN), fv.yn[None, :, None],
                      np.full((1, 1, 1), SIN), yw)
        term -= (n_u[:, None, None] * iy2) * (dxc_v[None, :, None] * ix2)

        term *= (fu.norm[:, None, None] * fv.norm[None, :, None]
                 * fw.norm[None, None, sl])

        keep = np.abs(term) > threshold
        ii, jj, ll = np.broadcast_arrays(iu, jv, lw)
        rows_i.append(ii[keep])
        rows_j.append(jj[keep])
        rows_l.append(ll[keep])
        vals.append(term[keep])

    return SparseTriple(np.concatenate(rows_i), np.concatenate(rows_j),
                        np.concatenate(rows_l), np.concatenate(vals),
                        n_out=len(fw))


def _pair_matrix(frow: ModeFamily, fcol: ModeFamily) -> np.ndarray:
    """M[r, c] = (phi_r, phi_c) on the nondim domain (alpha in the measure)."""
    alpha = frow.alpha
    ix = _pair(frow.xkind[:, None], frow.xq[:, None],
               fcol.xkind[None, :], fcol.xq[None, :])
    iy = _pair(np.full((1, 1), SIN), frow.yn[:, None],
               np.full((1, 1), SIN), fcol.yn[None, :])
    return (frow.norm[:, None] * fcol.norm[None, :]) * ix * (alpha * iy)


def _dx_matrix(fam: ModeFamily) -> np.ndarray:
    """Dx[l, j] = (phi_l, d phi_j/d x_hat); exact projection of the zonal derivative."""
    alpha = fam.alpha
    dk, dc = _x_derivative(fam.xkind, fam.xq)
    ix = _pair(fam.xkind[:, None], fam.xq[:, None], dk[None, :], fam.xq[None, :])
    iy = _pair(np.full((1, 1), SIN), fam.yn[:, None],
               np.full((1, 1), SIN), fam.yn[None, :])
    return (fam.norm[:, None] * fam.norm[None, :]) * (dc[None, :] * ix) * (alpha * iy)


def _const_projection(fam: ModeFamily) -> np.ndarray:
    """Coefficients of the constant function 1 in the family."""
    alpha = fam.alpha
    zero_k = np.full(1, COS)
    zero_q = np.zeros(1, dtype=int)
    ix = _pair(fam.xkind, fam.xq, zero_k, zero_q)
    iy = _pair(np.full(len(fam), SIN), fam.yn, zero_k, zero_q)
    return fam.norm * ix * (alpha * iy)


class SpectralBasis:
    """Both mode families plus every precomputed Galerkin object.

    Heavier mixed-family Jacobian tensors are built on first use and cached;
    the two same-family tensors the tendency needs are built eagerly.
    """

    def __init__(self, res: ResolutionSpec, params: PhysicalParams,
                 tensor_cap_mb: float = 512.0):
        params.validate()
        self.res = res
        self.alpha = params.alpha
        self.ell = params.L / math.pi
        self._cap_mb = tensor_cap_mb

        self.atm = _atm_family(res, params.alpha)
        self.ocn = _ocn_family(res, params.alpha)
        self._check_cap("atm", "atm", "atm")
        self._check_cap("ocn", "ocn", "ocn")

        self._tensors = {}
        self.jac_aaa = self.tensor("atm", "atm", "atm")
        self.jac_ooo = self.tensor("ocn", "ocn", "ocn")
        self.cross_mass = _pair_matrix(self.atm, self.ocn)   # (n_atm, n_ocn)
        self.dx_atm = _dx_matrix(self.atm)
        self.dx_ocn = _dx_matrix(self.ocn)
        self.const_atm = _const_projection(self.atm)
        self.const_ocn = _const_projection(self.ocn)

    def family(self, name: str) -> ModeFamily:
        if name == "atm":
            return self.atm
        if name == "ocn":
            return self.ocn
        raise ParamError(f"unknown basis family {name!r}")

    def _check_cap(self, *names):
        fams = [self.family(n) for n in names]
        # dense work block per sign combination, complex128, plus slack
        block = 48
        bytes_est = 4 * len(fams[0]) * len(fams[1]) * min(block, len(fams[2])) * 16
        if bytes_est > self._cap_mb * 1e6:
            raise ResolutionError(
                f"[numerics] resolution {self.res}: tensor work estimate "
                f"{bytes_est / 1e6:.0f} MB exceeds cap {self._cap_mb:.0f} MB")

    def tensor(self, fam_u: str, fam_v: str, fam_w: str) -> SparseTriple:
        key = (fam_u, fam_v, fam_w)
        if key not in self._tensors:
            self._check_cap(*key)
            self._tensors[key] = _jacobian_tensor(
                self.family(fam_u), self.family(fam_v), self.family(fam_w))
        return self._tensors[key]

    # SI spectra -------------------------------------------------------------

    @property
    def eig_atm(self):
        """Atmosphere -Laplacian eigenvalues, m^-2."""
        return self.atm.lam / self.ell ** 2

    @property
    def eig_ocn(self):
        return self.ocn.lam / self.ell ** 2

    @property
    def lambda_1(self) -> float:
        """Smallest -Laplacian eigenvalue over both families, m^-2."""
        return float(min(self.eig_atm.min(), self.eig_ocn.min()))


def build_basis(res: ResolutionSpec, params: PhysicalParams,
                tensor_cap_mb: float = 512.0) -> SpectralBasis:
    return SpectralBasis(res, params, tensor_cap_mb=tensor_cap_mb)


def gravest_eigenvalue(res: ResolutionSpec, params: PhysicalParams) -> float:
    """Smallest -Laplacian eigenvalue over both families, m^-2.

    Same value as SpectralBasis.lambda_1 but without building the
    advection tensors, for callers that only need the spectrum floor.
    """
    params.validate()
    ell = params.L / math.pi
    atm = _atm_family(res, params.alpha)
    ocn = _ocn_family(res, params.alpha)
    return float(min(atm.lam.min(), ocn.lam.min()) / ell ** 2)


def jacobian(basis: SpectralBasis, u, fam_u: str, v, fam_v: str,
             target: str):
    """Galerkin projection of J(u, v) onto a target family.

    u, v are coefficient vectors on their declared families. The projection
    is exact (interaction tensors); no aliasing at the configured truncation.
    """
    fu, fv = basis.family(fam_u), basis.family(fam_v)
    if len(u) != len(fu) or len(v) != len(fv):
        raise ParamError(
            f"jacobian: coefficient lengths ({len(u)}, {len(v)}) do not match "
            f"families ({len(fu)}, {len(fv)})")
    return basis.tensor(fam_u, fam_v, target).apply(np.asarray(u, dtype=float),
                                                    np.asarray(v, dtype=float))


def quad_points(alpha: float, nx: int, ny: int):
    """Gauss-Legendre collocation nodes/weights on the nondim domain.

    Returns flat arrays (x, y, w); weights include the full area measure, so
    sum(w * f) integrates f over [0, pi] x [0, alpha pi].
    """
    gx, wx = np.polynomial.legendre.leggauss(nx)
    gy, wy = np.polynomial.legendre.leggauss(ny)
    x = 0.5 * math.pi * (gx + 1.0)
    y = 0.5 * alpha * math.pi * (gy + 1.0)
    wx = wx * 0.5 * math.pi
    wy = wy * 0.5 * alpha * math.pi
    X, Y = np.meshgrid(x, y, indexing="ij")
    return X.ravel(), Y.ravel(), np.outer(wx, wy).ravel()
