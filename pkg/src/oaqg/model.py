"""The coupled tendency: two-layer atmosphere, slab ocean, radiation.

Prognostic variables (nondimensional coefficient vectors):

* ``psi_t``  barotropic atmospheric streamfunction (atm basis)
* ``psi_c``  baroclinic atmospheric streamfunction (atm basis)
* ``psi_o``  ocean streamfunction (ocean basis)
* ``theta_o`` ocean temperature anomaly T_o - T_o0 (ocean basis)

The atmospheric temperature anomaly is never stored: it is
``-temp_coeff * psi_c`` (in solver units, exactly ``-psi_c``), and the
vertical velocity has been eliminated by solving the atmospheric temperature
equation for it and substituting into the baroclinic vorticity equation. The
baroclinic prognostic operator is therefore (Lap - a^2); a diagnostic
(:meth:`Model.omega_diagnostic`) recovers the eliminated field afterwards.

Each vorticity equation is advanced as d/dt (D psi) = rhs with D the
per-mode diagonal of the inversion operator (eigenvalues lam, lam + a^2,
lam + 1/L_R^2, all positive); tendencies are -rhs / D because the
coefficient vector of D psi carries the -Laplacian sign. The ocean
temperature equation is advanced directly.

Quadratic terms use exact interaction tensors; the quartic longwave fluxes
and the coalbedo shortwave are collocated on a Gauss-Legendre grid sized
``grid_factor`` times the truncation and projected back. Temperatures enter
radiation as the odd quartic T|T|^3 so negative excursions stay defined.
"""

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .params import (PhysicalParams, ShortwaveConfig, ParamError, derive,
                     coalbedo)
from .scales import build_scales
from .basis import ResolutionSpec, build_basis, quad_points

__all__ = [
    "ModelFlags", "State", "Tendency", "Model", "NumericsError",
    "OmegaDiagnostic", "pure_jacobian_flags",
]


class NumericsError(RuntimeError):
    """Non-finite values appeared; message names the offending equation."""


@dataclass(frozen=True)
class ModelFlags:
    """Switches for individual physical terms (all on by default).

    ``thermo_coupling`` governs the eliminated-vertical-velocity bridge into
    the baroclinic equation: switching it off removes the a^2 terms there
    and reduces the baroclinic inversion diagonal to the bare Laplacian.
    The remaining flags remove exactly the term their name says, in every
    equation where it appears.
    """

    advection: bool = True
    beta: bool = True
    interlayer_friction: bool = True   # k_d coupling and wind stress d
    internal_friction: bool = True     # k_d'
    bottom_friction: bool = True       # r
    viscosity: bool = True             # nu_S
    thermal_diffusion: bool = True     # nu_T_tilde
    heat_exchange: bool = True         # lambda_heat
    longwave: bool = True
    shortwave: bool = True
    thermo_coupling: bool = True


def pure_jacobian_flags() -> ModelFlags:
    """Advection only: the configuration whose energy is conserved exactly."""
    return ModelFlags(advection=True, beta=False, interlayer_friction=False,
                      internal_friction=False, bottom_friction=False,
                      viscosity=False, thermal_diffusion=False,
                      heat_exchange=False, longwave=False, shortwave=False,
                      thermo_coupling=False)


@dataclass
class State:
    """Coefficient vectors in solver (nondimensional) units, plus time.

    ``t`` is nondimensional (multiply by 1/f0 for seconds). Multiply
    streamfunction coefficients by ``scales.psi`` and temperature
    coefficients by ``scales.temp`` for SI values; :meth:`Model.state_si`
    does this for you.
    """

    psi_t: np.ndarray
    psi_c: np.ndarray
    psi_o: np.ndarray
    theta_o: np.ndarray
    t: float = 0.0

    def copy(self) -> "State":
        return State(self.psi_t.copy(), self.psi_c.copy(),
                     self.psi_o.copy(), self.theta_o.copy(), self.t)

    def blocks(self):
        return (self.psi_t, self.psi_c, self.psi_o, self.theta_o)


@dataclass
class Tendency:
    """Time derivatives of the four coefficient vectors (solver units)."""

    psi_t: np.ndarray
    psi_c: np.ndarray
    psi_o: np.ndarray
    theta_o: np.ndarray

    def blocks(self):
        return (self.psi_t, self.psi_c, self.psi_o, self.theta_o)


@dataclass(frozen=True)
class OmegaDiagnostic:
    """Reconstructed vertical velocity (pressure coordinates).

    coeffs: atm-basis coefficients of omega, Pa/s.
    domain_integral: integral of omega over the domain, Pa m^2 / s.
      Reported only; the truncation does not constrain it to vanish.
    """

    coeffs: np.ndarray
    domain_integral: float


_EQ_NAMES = ("barotropic vorticity", "baroclinic vorticity",
             "ocean vorticity", "ocean temperature")


class Model:
    """Everything needed to evaluate tendencies at one resolution.

    Immutable after construction; tendency evaluation is pure and can run
    concurrently on distinct states.
    """

    def __init__(self, params: PhysicalParams | None = None,
                 shortwave: ShortwaveConfig | None = None,
                 res: ResolutionSpec | None = None,
                 flags: ModelFlags | None = None,
                 grid_factor: int = 6,
                 tensor_cap_mb: float = 512.0,
                 kappa_convention: str = "half"):
        self.params = params or PhysicalParams()
        self.shortwave = shortwave or ShortwaveConfig()
        self.res = res or ResolutionSpec()
        self.flags = flags or ModelFlags()
        self.shortwave.validate()
        if kappa_convention not in ("half", "full"):
            raise ParamError("[numerics] kappa_convention: must be 'half' "
                             f"or 'full', got {kappa_convention!r}")
        self.kappa_convention = kappa_convention
        self.derived = derive(self.params)
        self.scales = build_scales(self.params, self.derived)
        self.basis = build_basis(self.res, self.params,
                                 tensor_cap_mb=tensor_cap_mb)
        self.grid_factor = grid_factor

        p, d, s = self.params, self.derived, self.scales
        f0, ell = p.f0, s.ell
        self.lam_a = self.basis.atm.lam
        self.lam_o = self.basis.ocn.lam

        # nondimensional coefficients
        self.khat_d2 = p.k_d / (2.0 * f0)
        self.twokp = 2.0 * p.k_d_prime / f0
        self.rhat = p.r / f0
        self.dhat = p.d_wind / f0
        self.nuS = p.nu_S / (f0 * ell ** 2)
        self.nuTa = p.nu_T_tilde / (p.gamma_a * f0 * ell ** 2)
        self.nuTo = p.nu_T_tilde / (p.gamma_o * f0 * ell ** 2)
        self.lamh_a = p.lambda_heat / (p.gamma_a * f0)
        self.lamh_o = p.lambda_heat / (p.gamma_o * f0)
        self.sig_a = p.sigma_B * s.temp ** 3 / (p.gamma_a * f0)
        self.sig_o = p.sigma_B * s.temp ** 3 / (p.gamma_o * f0)
        self.betah = p.beta * ell / f0
        self.invLR2 = (ell / p.L_R) ** 2
        self.a2 = d.a_sq * ell ** 2 if self.flags.thermo_coupling else 0.0
        self.Ta0n = p.T_a0 / s.temp
        self.To0n = p.T_o0 / s.temp
        # energy weights of the temperature channels; the identity
        # mu * gamma_a * temp^2 / (ell f0)^2 == a_sq * ell^2 ties the
        # atmospheric weight to a2 and is asserted in the tests
        self.mu_hat_o = (d.mu * p.gamma_o) * s.temp ** 2 / (ell * f0) ** 2
        self.mu_hat_a = (d.mu * p.gamma_a) * s.temp ** 2 / (ell * f0) ** 2

        self.D1 = self.lam_a.copy()
        self.D2 = self.lam_a + self.a2
        self.D3 = self.lam_o + self.invLR2

        # collocation grid for the radiation terms
        qx = max(2 * self.res.k_zonal, self.res.m_ocn)
        qy = max(self.res.n_merid, self.res.p_ocn)
        self.grid_nx = grid_factor * qx + 8
        self.grid_ny = grid_factor * qy + 8
        gx, gy, gw = quad_points(p.alpha, self.grid_nx, self.grid_ny)
        self.grid_w = gw
        self.Ea = self.basis.atm.evaluate(gx, gy)
        self.Eo = self.basis.ocn.evaluate(gx, gy)
        self.Pa = (self.Ea * gw[:, None]).T.copy()
        self.Po = (self.Eo * gw[:, None]).T.copy()
        # zenith profile: largest insolation at the y = 0 wall
        sw = self.shortwave
        self.cosz_grid = np.clip(
            sw.cosz_base + sw.cosz_contrast * np.cos(gy / p.alpha), 0.0, 1.0)
        self.q_o_grid = (sw.dist_ratio_sq * sw.S_const * self.cosz_grid
                         / (p.gamma_o * f0 * s.temp))
        self.R1a_n = sw.R1_a / (p.gamma_a * f0 * s.temp)
        self.R1o_n = sw.R1_o / (p.gamma_o * f0 * s.temp)
        self.R2a_lin = sw.R2_a / (p.gamma_a * f0)
        self.R2o_lin = sw.R2_o / (p.gamma_o * f0)
        self.omega_scale = p.R_star * s.temp * f0 / (p.sigma_stat * p.p)

    # -- constructors and views -------------------------------------------

    @property
    def n_atm(self) -> int:
        return len(self.basis.atm)

    @property
    def n_ocn(self) -> int:
        return len(self.basis.ocn)

    def zero_state(self) -> State:
        return State(np.zeros(self.n_atm), np.zeros(self.n_atm),
                     np.zeros(self.n_ocn), np.zeros(self.n_ocn))

    def random_state(self, seed: int, psi_amp: float = 1e-3,
                     theta_amp: float = 1e-3) -> State:
        """Red-spectrum random initial condition (solver units).

        Coefficients fall off like 1/eigenvalue so the fields are smooth;
        the amplitudes set the typical size of the gravest coefficients.
        """
        rng = np.random.default_rng(seed)
        sa = self.lam_a.min() / self.lam_a
        so = self.lam_o.min() / self.lam_o
        return State(
            psi_amp * sa * rng.standard_normal(self.n_atm),
            psi_amp * sa * rng.standard_normal(self.n_atm),
            psi_amp * so * rng.standard_normal(self.n_ocn),
            theta_amp * so * rng.standard_normal(self.n_ocn),
        )

    def state_si(self, state: State) -> dict:
        """SI view: streamfunctions in m^2/s, temperatures in K, time in s."""
        s = self.scales
        return {
            "psi_t": state.psi_t * s.psi,
            "psi_c": state.psi_c * s.psi,
            "psi_o": state.psi_o * s.psi,
            "theta_o": state.theta_o * s.temp,
            "delta_T_a": -state.psi_c * s.temp,
            "time": state.t * s.time,
        }

    # -- linear diagonals ---------------------------------------------------

    @cached_property
    def vorticity_diag(self):
        """Per-mode diagonal pieces of the right-hand sides.

        g_t, g_c, g_o multiply (psi_t, psi_c, psi_o) in the vorticity-level
        rhs; r_th is the ocean-temperature decay rate. These are exactly
        the terms the implicit half of an IMEX scheme owns.
        """
        fl = self.flags
        g_t = (self.khat_d2 * fl.interlayer_friction * self.lam_a
               + self.nuS * fl.viscosity * self.lam_a ** 2)
        g_c = ((self.khat_d2 * fl.interlayer_friction
                + self.twokp * fl.internal_friction) * self.lam_a
               + self.nuS * fl.viscosity * self.lam_a ** 2
               + self.a2 * self.nuTa * fl.thermal_diffusion * self.lam_a)
        g_o = ((self.dhat * fl.interlayer_friction
                + self.rhat * fl.bottom_friction) * self.lam_o
               + self.nuS * fl.viscosity * self.lam_o ** 2)
        r_th = self.nuTo * fl.thermal_diffusion * self.lam_o
        return g_t, g_c, g_o, r_th

    @cached_property
    def implicit_rates(self):
        """Per-mode decay rates at tendency level: tend -= rate * coeff."""
        g_t, g_c, g_o, r_th = self.vorticity_diag
        return g_t / self.D1, g_c / self.D2, g_o / self.D3, r_th

    # -- radiation fields ---------------------------------------------------

    def _temps_on_grid(self, state: State):
        Ta = self.Ta0n - self.Ea @ state.psi_c
        To = self.To0n + self.Eo @ state.theta_o
        return Ta, To

    def _longwave_grid(self, Ta, To):
        """Channel-scaled longwave fluxes on the grid (odd quartic)."""
        fa = np.abs(Ta) ** 3 * Ta
        fo = np.abs(To) ** 3 * To
        qa = self.sig_a * self.params.eps_a * (fo - 2.0 * fa)
        qo = self.sig_o * (self.params.eps_a * fa - fo)
        return qa, qo

    def _shortwave_coeffs(self, state: State, To_grid):
        """Channel-scaled shortwave forcing, atm and ocn coefficients.

        Everything except the coalbedo factor is spectral-exact; the
        coalbedo runs through the grid. ``To_grid`` may be None unless the
        mode needs it.
        """
        sw = self.shortwave
        b = self.basis
        ra = self.R1a_n * b.const_atm
        ro = self.R1o_n * b.const_ocn
        if sw.mode == "budyko_sellers":
            alb = coalbedo(sw, To_grid * self.scales.temp)
            ro = ro + self.Po @ (self.q_o_grid * alb)
        elif sw.mode == "custom_linear":
            ra = ra + self.R2a_lin * (self.Ta0n * b.const_atm - state.psi_c)
            ro = ro + self.R2o_lin * (self.To0n * b.const_ocn + state.theta_o)
        return ra, ro

    def longwave(self, state: State):
        """SI Galerkin projections (W m^-2) of the two longwave fluxes."""
        Ta, To = self._temps_on_grid(state)
        qa_n, qo_n = self._longwave_grid(Ta, To)
        p, s = self.params, self.scales
        return (self.Pa @ qa_n * (p.gamma_a * p.f0 * s.temp),
                self.Po @ qo_n * (p.gamma_o * p.f0 * s.temp))

    def shortwave_fields(self, state: State):
        """SI Galerkin projections (W m^-2) of the shortwave forcing."""
        To_g = None
        if self.shortwave.mode == "budyko_sellers":
            _, To_g = self._temps_on_grid(state)
        ra, ro = self._shortwave_coeffs(state, To_g)
        p, s = self.params, self.scales
        return (ra * (p.gamma_a * p.f0 * s.temp),
                ro * (p.gamma_o * p.f0 * s.temp))

    def _thermo_atm(self, state: State, qa_n, ra_n, with_diffusion: bool):
        """Atmospheric heat source G_a (channel units, atm coefficients).

        Assembled from whichever of exchange / longwave / shortwave the
        flags keep; the diffusion piece is optional because the tendency
        carries it on the linear diagonal instead.
        """
        fl = self.flags
        b = self.basis
        ga = np.zeros(self.n_atm)
        if fl.heat_exchange:
            ga += self.lamh_a * ((self.To0n - self.Ta0n) * b.const_atm
                                 + b.cross_mass @ state.theta_o + state.psi_c)
        if fl.longwave:
            ga += self.Pa @ qa_n
        if fl.shortwave:
            ga += ra_n
        if with_diffusion and fl.thermal_diffusion:
            ga += self.nuTa * self.lam_a * state.psi_c
        return ga

    # -- the tendency -------------------------------------------------------

    def tendency(self, state: State, split: str = "full") -> Tendency:
        """Evaluate d(state)/dt in solver units.

        split = 'full' gives the complete tendency; 'explicit' omits the
        per-mode linear diagonal (the implicit half of an IMEX scheme), so
        full = explicit - implicit_rates * coefficients, blockwise.
        """
        fl = self.flags
        b = self.basis
        ct, cc, co, th = state.blocks()

        Lt = -self.lam_a * ct
        Lc = -self.lam_a * cc
        Lo = -self.lam_o * co

        rhs_t = np.zeros(self.n_atm)
        rhs_c = np.zeros(self.n_atm)
        rhs_o = np.zeros(self.n_ocn)
        dth = np.zeros(self.n_ocn)

        if fl.advection:
            T = b.jac_aaa
            ui, vj, lk = T.i, T.j, T.l
            # barotropic: -J(psi_t, Lap psi_t) - J(psi_c, Lap psi_c)
            w = T.v * (ct[ui] * Lt[vj] + cc[ui] * Lc[vj])
            rhs_t -= np.bincount(lk, weights=w, minlength=self.n_atm)
            # baroclinic: -J(psi_c, Lap psi_t) - J(psi_t, Lap psi_c)
            #             + a^2 J(psi_t, psi_c)
            w = T.v * (cc[ui] * Lt[vj] + ct[ui] * Lc[vj]
                       - self.a2 * ct[ui] * cc[vj])
            rhs_c -= np.bincount(lk, weights=w, minlength=self.n_atm)
            To_ = b.jac_ooo
            w = To_.v * (co[To_.i] * Lo[To_.j])
            rhs_o -= np.bincount(To_.l, weights=w, minlength=self.n_ocn)
            w = To_.v * (co[To_.i] * th[To_.j])
            dth -= np.bincount(To_.l, weights=w, minlength=self.n_ocn)

        if fl.beta:
            rhs_t -= self.betah * (b.dx_atm @ ct)
            rhs_c -= self.betah * (b.dx_atm @ cc)
            rhs_o -= self.betah * (b.dx_ocn @ co)

        if fl.interlayer_friction:
            # off-diagonal parts of the shear stress (k_d/2) Lap(S) and the
            # wind stress d Lap(S); own-mode parts sit on the diagonal
            lap_o_on_atm = b.cross_mass @ (self.lam_o * co)
            rhs_t -= self.khat_d2 * (-self.lam_a * cc + lap_o_on_atm)
            rhs_c -= self.khat_d2 * (-self.lam_a * ct + lap_o_on_atm)
            rhs_o += self.dhat * (b.cross_mass.T @ (-self.lam_a * (ct + cc)))

        # thermodynamics
        need_grid = fl.longwave or (
            fl.shortwave and self.shortwave.mode == "budyko_sellers")
        qa_n = qo_n = To_g = None
        if need_grid:
            Ta_g, To_g = self._temps_on_grid(state)
            if fl.longwave:
                qa_n, qo_n = self._longwave_grid(Ta_g, To_g)
        ra_n = ro_n = None
        if fl.shortwave:
            ra_n, ro_n = self._shortwave_coeffs(state, To_g)

        if self.a2 != 0.0:
            rhs_c += self.a2 * self._thermo_atm(state, qa_n, ra_n,
                                                with_diffusion=False)
        if fl.heat_exchange:
            dth += self.lamh_o * ((self.Ta0n - self.To0n) * b.const_ocn
                                  - b.cross_mass.T @ cc - th)
        if fl.longwave:
            dth += self.Po @ qo_n
        if fl.shortwave:
            dth += ro_n

        if split == "full":
            g_t, g_c, g_o, r_th = self.vorticity_diag
            rhs_t = rhs_t + g_t * ct
            rhs_c = rhs_c + g_c * cc
            rhs_o = rhs_o + g_o * co
            dth = dth - r_th * th
        elif split != "explicit":
            raise ParamError(f"tendency: unknown split {split!r}")

        tend = Tendency(-rhs_t / self.D1, -rhs_c / self.D2,
                        -rhs_o / self.D3, dth)
        for name, arr in zip(_EQ_NAMES, tend.blocks()):
            if not np.all(np.isfinite(arr)):
                raise NumericsError(
                    f"non-finite tendency in the {name} equation "
                    f"at t = {state.t:.6g}")
        return tend

    # -- omega ----------------------------------------------------------------

    def omega_diagnostic(self, state: State,
                         tend: Tendency | None = None) -> OmegaDiagnostic:
        """Reconstruct the eliminated vertical velocity from its defining row.

        omega = (R*/(sigma p)) [dT_a/dt + J(psi_t, T_a) - G_a / gamma_a];
        in solver units the anomaly dT_a is -psi_c and the advection of the
        constant reference vanishes, so every piece is already at hand.
        """
        if tend is None:
            tend = self.tendency(state)
        fl = self.flags
        dta = -tend.psi_c
        adv = np.zeros(self.n_atm)
        if fl.advection:
            adv = -self.basis.jac_aaa.apply(state.psi_t, state.psi_c)
        need_grid = fl.longwave or (
            fl.shortwave and self.shortwave.mode == "budyko_sellers")
        qa_n = To_g = None
        if need_grid:
            Ta_g, To_g = self._temps_on_grid(state)
            if fl.longwave:
                qa_n, _ = self._longwave_grid(Ta_g, To_g)
        ra_n = None
        if fl.shortwave:
            ra_n, _ = self._shortwave_coeffs(state, To_g)
        ga = self._thermo_atm(state, qa_n, ra_n, with_diffusion=True)

        coeffs = (dta + adv - ga) * self.omega_scale
        integral = float(coeffs @ self.basis.const_atm) * self.scales.ell ** 2
        return OmegaDiagnostic(coeffs=coeffs, domain_integral=integral)

    def with_flags(self, **kw) -> "Model":
        """A sibling model with some flags replaced."""
        return Model(self.params, self.shortwave, self.res,
                     replace(self.flags, **kw), grid_factor=self.grid_factor,
                     kappa_convention=self.kappa_convention)
