"""Norms, the energy budget, and absorbing-set constants.

Weighted norms
--------------
The weak norm pairs the three streamfunctions at gradient level, the
ocean weighted by kappa, and adds heat-capacity-weighted temperature
anomalies; the strong norm is its Laplacian-level analogue. Both are
returned SQUARED, in SI units m^4 s^-2 (weak) and m^2 s^-2 (strong).
The norms always use the full kappa: they are fixed yardsticks for
experiments, not budget bookkeeping.

The budget instead weighs the ocean by kappa/2 by default (the "half"
convention): with that weight the interlayer friction matches the
perfect square (k_d/2)|grad(psi_t + psi_c - psi_o)|^2 up to a wall flux
from the mixed atmosphere/ocean bases (x-periodic against wall-clamped);
in practice the field stays positive, but only the single-family sinks
(internal, bottom, viscous, diffusive, exchange, infrared) carry a sign
guarantee. The "full" convention (weight kappa) is available for
bookkeeping that pairs kappa with k_d directly; the budget identity
closes either way.

Energy budget
-------------
Every field is computed from coefficients/quadrature directly, never from
the time stepper. The exact discrete identity (verified to near round-off
by the tests) is

    d/dt ke_pe = sw_input + ref_flux - fric_interlayer - fric_internal
                 - fric_bottom - visc - diff_thermal - heat_exch - ir_sink

where ref_flux (reference-temperature bookkeeping: the parts of the
radiative and exchange work proportional to T_a0, T_o0) and diff_thermal
(thermal diffusion sink) are carried as separate named fields; the plain
beta and advection terms vanish identically in these inner products.
omega_work reports the vertical-velocity bridge of the two-layer budget
and is intentionally NOT part of the closure sum: its content is already
distributed over the thermodynamic fields by the elimination.

The identity is exact when the vertical-coupling bridge is active
(thermo_coupling on) or when all thermodynamic sources are off; mixed
configurations (bridge off, radiation on) are not budgeted.
"""

import math
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from .params import PhysicalParams, ShortwaveConfig, ParamError, derive
from .model import Model, State, Tendency

__all__ = [
    "ocean_weight", "w_norm", "s_norm", "energy", "energy_rate",
    "EnergyBudget", "energy_budget", "attach_residuals",
    "AbsorbingSet", "absorbing_set", "analytic_energy_bound",
]


def ocean_weight(model: Model) -> float:
    k = model.derived.kappa
    return 0.5 * k if model.kappa_convention == "half" else k


def w_norm(model: Model, state: State) -> float:
    """Squared weak norm, SI m^4 s^-2.

    |grad psi_t|^2 + |grad psi_c|^2 + kappa(|grad psi_o|^2 +
    |psi_o|^2/L_R^2) + mu(gamma_a |dT_a|^2 + gamma_o |dT_o|^2),
    domain-integrated.
    """
    la, lo = model.lam_a, model.lam_o
    ct, cc, co, th = state.blocks()
    k = model.derived.kappa
    nd = (ct ** 2 @ la + cc ** 2 @ la
          + k * (co ** 2 @ lo + model.invLR2 * co @ co)
          + model.mu_hat_a * cc @ cc + model.mu_hat_o * th @ th)
    return float(nd) * model.scales.energy


def w_norm_components(model: Model, state: State) -> dict:
    """Blockwise pieces of w_norm, same units; values sum to w_norm.

    The psi_c entry carries both its kinetic part and the slaved
    atmospheric temperature part (delta T_a = -psi_c).
    """
    la, lo = model.lam_a, model.lam_o
    ct, cc, co, th = state.blocks()
    k = model.derived.kappa
    e = model.scales.energy
    return {
        "psi_t": float(ct ** 2 @ la) * e,
        "psi_c": float(cc ** 2 @ la + model.mu_hat_a * cc @ cc) * e,
        "psi_o": float(k * (co ** 2 @ lo + model.invLR2 * co @ co)) * e,
        "theta_o": float(model.mu_hat_o * th @ th) * e,
    }


def s_norm(model: Model, state: State) -> float:
    """Squared strong norm, SI m^2 s^-2 (Laplacian level).

    |Lap psi_t|^2 + |Lap psi_c|^2 + kappa(|Lap psi_o|^2 +
    |grad psi_o|^2/L_R^2) + mu(gamma_a |grad dT_a|^2 +
    gamma_o |grad dT_o|^2).
    """
    la, lo = model.lam_a, model.lam_o
    ct, cc, co, th = state.blocks()
    k = model.derived.kappa
    nd = (ct ** 2 @ la ** 2 + cc ** 2 @ la ** 2
          + k * (co ** 2 @ lo ** 2 + model.invLR2 * co ** 2 @ lo)
          + model.mu_hat_a * cc ** 2 @ la + model.mu_hat_o * th ** 2 @ lo)
    return float(nd) * model.scales.ell ** 2 * model.params.f0 ** 2


def energy(model: Model, state: State) -> float:
    """The budgeted energy, SI m^4 s^-2.

    Differs from w_norm/2 in two deliberate ways: the ocean carries the
    budget convention weight (kappa/2 by default) rather than the norm's
    fixed kappa, and the baroclinic temperature weight follows the
    model's active a^2 (zero when the vertical coupling is off), so that
    the quantity actually obeys the budget identity for the running flag
    set.
    """
    la, lo = model.lam_a, model.lam_o
    ct, cc, co, th = state.blocks()
    w = ocean_weight(model)
    nd = 0.5 * (ct ** 2 @ la + cc ** 2 @ la
                + w * (co ** 2 @ lo + model.invLR2 * co @ co)
                + model.a2 * cc @ cc + model.mu_hat_o * th @ th)
    return float(nd) * model.scales.energy


def energy_rate(model: Model, state: State, tend: Tendency) -> float:
    """d(energy)/dt assembled as <state, D tendency>, SI m^4 s^-3."""
    w = ocean_weight(model)
    nd = (state.psi_t @ (model.D1 * tend.psi_t)
          + state.psi_c @ (model.D2 * tend.psi_c)
          + w * (state.psi_o @ (model.D3 * tend.psi_o))
          + model.mu_hat_o * state.theta_o @ tend.theta_o)
    return float(nd) * model.scales.power


@dataclass
class EnergyBudget:
    """One output time of the budget; see the module docstring for the
    closure identity and units (ke_pe m^4 s^-2, every flux m^4 s^-3)."""

    time: float               # s
    ke_pe: float
    fric_interlayer: float
    fric_internal: float
    fric_bottom: float
    visc: float
    diff_thermal: float
    heat_exch: float
    ir_sink: float
    sw_input: float
    ref_flux: float
    omega_work: float
    ddt_residual: float = float("nan")

    @property
    def net_flux(self) -> float:
        return (self.sw_input + self.ref_flux - self.fric_interlayer
                - self.fric_internal - self.fric_bottom - self.visc
                - self.diff_thermal - self.heat_exch - self.ir_sink)

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        out["net_flux"] = self.net_flux
        return out


def energy_budget(model: Model, state: State,
                  tend: Tendency | None = None) -> EnergyBudget:
    fl = model.flags
    if tend is None:
        tend = model.tendency(state)
    la, lo = model.lam_a, model.lam_o
    ct, cc, co, th = state.blocks()
    w = ocean_weight(model)
    b = model.basis
    p = model.params
    s = model.scales
    pw = s.power

    grad_o = co ** 2 @ lo
    fric_inter = 0.0
    if fl.interlayer_friction:
        # shear + wind stress; the two cross terms carry the Laplacian
        # weight on opposite sides of the mixed mass matrix because the
        # wall-clamped ocean basis is not x-periodic, so the projected
        # Laplacian and the Laplacian of the projection differ. Under the
        # half convention this is (k_d/2)|grad(psi_t+psi_c-psi_o)|^2 plus
        # that wall flux.
        grad_tc = (ct + cc) ** 2 @ la
        cross_atm = (ct + cc) @ (b.cross_mass @ (lo * co))
        cross_ocn = (la * (ct + cc)) @ (b.cross_mass @ co)
        fric_inter = (model.khat_d2 * (grad_tc - cross_atm)
                      + w * model.dhat * (grad_o - cross_ocn))
    fric_int = model.twokp * cc ** 2 @ la if fl.internal_friction else 0.0
    fric_bot = w * model.rhat * grad_o if fl.bottom_friction else 0.0
    visc = (model.nuS * (ct ** 2 @ la ** 2 + cc ** 2 @ la ** 2
                         + w * co ** 2 @ lo ** 2)
            if fl.viscosity else 0.0)
    diff = (model.a2 * model.nuTa * cc ** 2 @ la
            + model.mu_hat_o * model.nuTo * th ** 2 @ lo
            if fl.thermal_diffusion else 0.0)

    # thermodynamic work; common prefactors tie the channels together:
    # a2 * lamh_a == mu_hat_o * lamh_o and a2 * sig_a == mu_hat_o * sig_o
    heat = ref_exch = 0.0
    if fl.heat_exchange:
        mu_lam = model.mu_hat_o * model.lamh_o
        diff_sq = cc @ cc + th @ th + 2.0 * cc @ (b.cross_mass @ th)
        anom_int = -(cc @ b.const_atm) - th @ b.const_ocn
        heat = mu_lam * diff_sq
        ref_exch = -mu_lam * (model.Ta0n - model.To0n) * anom_int

    ir = ref_lw = 0.0
    if fl.longwave:
        mu_sig = model.mu_hat_o * model.sig_o
        Ta, To = model._temps_on_grid(state)
        fa = np.abs(Ta) ** 3 * Ta
        fo = np.abs(To) ** 3 * To
        eps = p.eps_a
        integrand = ((1.0 - eps) * np.abs(To) ** 5 + eps * np.abs(Ta) ** 5
                     + eps * (fa - fo) * (Ta - To))
        ir = mu_sig * model.grid_w @ integrand
        qa_bar = eps * (fo - 2.0 * fa)
        qo_bar = eps * fa - fo
        ref_lw = -mu_sig * (model.Ta0n * model.grid_w @ qa_bar
                            + model.To0n * model.grid_w @ qo_bar)

    sw = 0.0
    if fl.shortwave:
        To_g = None
        if model.shortwave.mode == "budyko_sellers":
            _, To_g = model._temps_on_grid(state)
        ra_n, ro_n = model._shortwave_coeffs(state, To_g)
        sw = (model.mu_hat_a * (-cc) @ ra_n
              + model.mu_hat_o * th @ ro_n)

    om = model.omega_diagnostic(state, tend)
    om_work = model.a2 * cc @ (om.coeffs / model.omega_scale)

    return EnergyBudget(
        time=state.t * s.time,
        ke_pe=energy(model, state),
        fric_interlayer=fric_inter * pw,
        fric_internal=fric_int * pw,
        fric_bottom=fric_bot * pw,
        visc=visc * pw,
        diff_thermal=diff * pw,
        heat_exch=heat * pw,
        ir_sink=ir * pw,
        sw_input=sw * pw,
        ref_flux=(ref_exch + ref_lw) * pw,
        omega_work=om_work * pw,
    )


def attach_residuals(budgets: list) -> None:
    """Fill ddt_residual in place by centered differences of ke_pe.

    Endpoints keep NaN. The residual compares the differenced energy
    rate against the analytic net flux at the center time, so it shrinks
    at second order as dt and the output spacing shrink together.
    """
    for i in range(1, len(budgets) - 1):
        lo, hi = budgets[i - 1], budgets[i + 1]
        dt = hi.time - lo.time
        if dt <= 0.0:
            raise ParamError("attach_residuals: times must increase")
        ddt = (hi.ke_pe - lo.ke_pe) / dt
        budgets[i].ddt_residual = abs(ddt - budgets[i].net_flux)


# -- absorbing set -----------------------------------------------------------

@dataclass(frozen=True)
class AbsorbingSet:
    """Absorbing-ball constants for the squared weak norm.

    lambda_0 in 1/s; E_bound in w_norm units per second (m^4 s^-3);
    rho_w_sq = 2 E / lambda_0 is the ball radius squared; entry_time gives
    the Gronwall bound on the time to enter from a given squared norm.
    """

    lambda_0: float
    argmin: str
    E_bound: float
    mode: str    # 'analytic' or 'empirical', a label for reports

    @property
    def rho_w_sq(self) -> float:
        return 2.0 * self.E_bound / self.lambda_0

    def entry_time(self, norm0_sq: float) -> float:
        if norm0_sq <= 0.0:
            return 0.0
        arg = self.lambda_0 * norm0_sq / self.E_bound
        if arg <= 1.0:
            return 0.0
        return math.log(arg) / self.lambda_0


def absorbing_set(params: PhysicalParams, lambda_1: float, E_bound: float,
                  mode: str = "analytic") -> AbsorbingSet:
    """Smallest dissipation rate over the four channels, and the ball."""
    if E_bound <= 0.0:
        raise ParamError("[numerics] E_bound: must be > 0")
    cands = {
        "viscosity nu_S": params.nu_S,
        "ocean thermal nu_T/gamma_o": params.nu_T_tilde / params.gamma_o,
        "atm thermal nu_T/gamma_a": params.nu_T_tilde / params.gamma_a,
        "bottom/Rossby r L_R^2": params.r * params.L_R ** 2,
    }
    argmin = min(cands, key=cands.get)
    return AbsorbingSet(lambda_0=lambda_1 * cands[argmin], argmin=argmin,
                        E_bound=E_bound, mode=mode)


def _shortwave_sup(cfg: ShortwaveConfig):
    """Upper bounds on |R_a|, |R_o| for bounded forcing modes."""
    if cfg.mode == "constant":
        return abs(cfg.R1_a), abs(cfg.R1_o)
    if cfg.mode == "budyko_sellers":
        peak = cfg.dist_ratio_sq * cfg.S_const * cfg.cosz_max * cfg.beta_plus
        return abs(cfg.R1_a), abs(cfg.R1_o) + peak
    if cfg.mode == "custom_linear" and cfg.R2_a == 0.0 and cfg.R2_o == 0.0:
        return abs(cfg.R1_a), abs(cfg.R1_o)
    raise ParamError(
        "[shortwave] analytic energy bound needs bounded forcing; "
        f"mode {cfg.mode!r} grows with temperature")


def analytic_energy_bound(params: PhysicalParams, cfg: ShortwaveConfig,
                          lambda_1: float) -> float:
    """Worst-case source constant E for the absorbing ball.

    Young-absorbs every signed work term against the weak-norm decay:
    the three quadratic works (two shortwave channels, reference-level
    heat exchange) each give up lambda_0/6 of the decay; the quartic
    reference-level infrared works are absorbed into half of their own
    quintic sinks pointwise. Deliberately conservative; the point is a
    finite, fully analytic ceiling.
    """
    d = absorbing_set(params, lambda_1, E_bound=1.0)   # for lambda_0 only
    lam0 = d.lambda_0
    mu = derive(params).mu
    area = params.L ** 2 * params.alpha
    sup_a, sup_o = _shortwave_sup(cfg)

    b_sw_a = math.sqrt(mu / params.gamma_a * area) * sup_a
    b_sw_o = math.sqrt(mu / params.gamma_o * area) * sup_o
    dT0 = abs(params.T_a0 - params.T_o0)
    b_ex = (mu * params.lambda_heat * dT0 * math.sqrt(area)
            * (1.0 / math.sqrt(mu * params.gamma_a)
               + 1.0 / math.sqrt(mu * params.gamma_o)))
    quad = 1.5 * (b_sw_a ** 2 + b_sw_o ** 2 + b_ex ** 2) / lam0

    # pointwise Young c x^4 <= k x^5 + (1/5)(4/5)^4 c^5 / k^4, absorbing
    # each quartic reference work into a quarter of the matching quintic
    eps = params.eps_a
    pieces = (
        (2.0 * eps * params.T_a0, eps / 4.0),        # T_a0 |Q_a| vs |T_a|^5
        (eps * params.T_a0, (1.0 - eps) / 4.0),      # T_a0 |Q_a| vs |T_o|^5
        (eps * params.T_o0, eps / 4.0),              # T_o0 |Q_o| vs |T_a|^5
        (params.T_o0, (1.0 - eps) / 4.0),            # T_o0 |Q_o| vs |T_o|^5
    )
    quintic = sum((0.2 * (0.8 ** 4) * c ** 5 / k ** 4)
                  for c, k in pieces)
    lw = mu * params.sigma_B * area * quintic
    return quad + lw
