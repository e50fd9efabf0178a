"""Physical constants, derived coefficients, and the radiative reference state.

All quantities in this module are SI. The solver's internal
nondimensionalization lives in :mod:`oaqg.scales`; nothing here depends on a
basis or a grid, so these functions are safe to call from anywhere (pure,
reentrant, no shared state).
"""

from dataclasses import dataclass, fields, replace
import math


class ParamError(ValueError):
    """A physically inadmissible parameter value; message names the field."""


class NonConvergence(RuntimeError):
    """An iterative solve ran out of iterations; message reports the residual."""


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the coupled channel model.

    Defaults reproduce the standard desk-scale configuration; values that the
    literature only pins through products or orders of magnitude are chosen so
    the expected products land exactly, and are annotated in the packaged
    defaults file (``oaqg/data/defaults.cfg``).
    """

    # --- geometry -----------------------------------------------------------
    L: float = 2.0e7            # zonal domain length, m
    alpha: float = 0.75         # aspect ratio; meridional width = alpha * L

    # --- rotation -----------------------------------------------------------
    f0: float = 1.032e-4        # Coriolis parameter at mid-channel, s^-1
    beta: float = 1.6e-11       # meridional Coriolis gradient, m^-1 s^-1

    # --- stratification / thermodynamics of the atmosphere -------------------
    p_delta: float = 5.0e4      # pressure thickness of each layer, Pa
    p: float = 5.0e4            # reference pressure, Pa
    R_star: float = 287.0       # gas constant of dry air, J kg^-1 K^-1
    sigma_stat: float = 1.830422e-6  # static stability, m^2 s^-2 Pa^-2

    # --- radiation ----------------------------------------------------------
    sigma_B: float = 5.67e-8    # Stefan-Boltzmann constant, W m^-2 K^-4
    eps_a: float = 0.85         # atmosphere longwave emissivity, in (0, 1]
    lambda_heat: float = 20.0   # surface sensible+latent exchange, W m^-2 K^-1

    # --- heat capacities ----------------------------------------------------
    gamma_a: float = 3.0e6      # atmosphere column heat capacity, J m^-2 K^-1
    gamma_o: float = 1.6666667e8  # ocean mixed-layer heat capacity, J m^-2 K^-1

    # --- friction and mixing ------------------------------------------------
    k_d: float = 3.0e-6         # surface/interlayer Ekman friction, s^-1
    k_d_prime: float = 1.0e-6   # internal (shear) friction, s^-1
    r: float = 1.0e-7           # ocean bottom friction, s^-1
    C_wind: float = 0.1         # wind-stress transfer constant, kg m^-2 s^-1
    rho_o: float = 1.0e3        # ocean layer density, kg m^-3
    h_o: float = 500.0          # ocean layer depth, m
    nu_S: float = 400.0         # lateral eddy viscosity, m^2 s^-1
    nu_T_tilde: float = 7.6e3   # lateral thermal diffusivity, W K^-1

    # --- ocean dynamics -----------------------------------------------------
    L_R: float = 4.0e4          # reduced Rossby deformation radius, m

    # --- reference temperatures (radiative equilibrium of the mean forcing) --
    T_a0: float = 325.6157048323937    # K
    T_o0: float = 339.70355742251871   # K

    @property
    def d_wind(self) -> float:
        """Wind-stress drag coefficient d = C/(rho h), s^-1."""
        return self.C_wind / (self.rho_o * self.h_o)

    def validate(self) -> None:
        positive = (
            "L", "f0", "p_delta", "p", "R_star", "sigma_stat", "sigma_B",
            "lambda_heat", "gamma_a", "gamma_o", "k_d", "k_d_prime", "r",
            "C_wind", "rho_o", "h_o", "nu_S", "nu_T_tilde", "L_R",
        )
        for name in positive:
            if not getattr(self, name) > 0.0:
                raise ParamError(f"[physical] {name}: must be > 0")
        if not 0.0 < self.alpha < 1.0:
            raise ParamError("[physical] alpha: must lie in (0, 1)")
        if not 0.0 < self.eps_a <= 1.0:
            raise ParamError("[physical] eps_a: must lie in (0, 1]")
        if not self.beta >= 0.0:
            raise ParamError("[physical] beta: must be >= 0")
        for name in ("T_a0", "T_o0"):
            if not math.isfinite(getattr(self, name)):
                raise ParamError(f"[physical] {name}: must be finite")
        if not math.isfinite(self.d_wind) or self.d_wind <= 0.0:
            raise ParamError("[physical] C_wind/rho_o/h_o: drag d = C/(rho h) "
                             "must be finite and positive")


@dataclass(frozen=True)
class DerivedParams:
    """Constants computed from :class:`PhysicalParams` by :func:`derive`."""

    kappa: float        # ocean energy weight rho h k_d / C, dimensionless
    mu: float           # thermodynamic weight R*^2/(2 p^2 gamma_a sigma), m^2 s^-2 K^-2
    nu_T: float         # mu * nu_T_tilde
    eps_a_tilde: float  # 0.7 * min(eps_a, 1 - eps_a)
    a_sq: float         # baroclinic stratification constant 2 f0^2/(p_delta^2 sigma), m^-2
    temp_coeff: float   # shear-temperature proportionality 2 p f0/(R* p_delta), K s m^-2


def derive(params: PhysicalParams) -> DerivedParams:
    """Compute the derived constants; pure and deterministic.

    Raises :class:`ParamError` naming the offending field when the physical
    parameters are inadmissible.
    """
    params.validate()
    mu = params.R_star ** 2 / (2.0 * params.p ** 2 * params.gamma_a * params.sigma_stat)
    return DerivedParams(
        kappa=params.rho_o * params.h_o * params.k_d / params.C_wind,
        mu=mu,
        nu_T=mu * params.nu_T_tilde,
        eps_a_tilde=0.7 * min(params.eps_a, 1.0 - params.eps_a),
        a_sq=2.0 * params.f0 ** 2 / (params.p_delta ** 2 * params.sigma_stat),
        temp_coeff=2.0 * params.p * params.f0 / (params.R_star * params.p_delta),
    )


# ---------------------------------------------------------------------------
# shortwave forcing configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShortwaveConfig:
    """Shortwave (solar) forcing model.

    mode
        ``constant``: R_i = R1_i, no temperature dependence.
        ``budyko_sellers``: the ocean channel receives
        R_o = R1_o + dist_ratio_sq * S_const * cosZ(y) * coalbedo(T_o);
        the atmosphere keeps its constant part R1_a.
        ``custom_linear``: R_i = R1_i + R2_i * T_i on both channels.

    The zenith factor is the meridional profile
    ``clip(cosz_base + cosz_contrast * cos(pi y / (alpha L)), 0, 1)``,
    largest at the channel's southern wall.
    """

    mode: str = "budyko_sellers"
    R1_a: float = 160.0         # W m^-2
    R1_o: float = 0.0           # W m^-2
    R2_a: float = 0.0           # W m^-2 K^-1 (custom_linear only)
    R2_o: float = 0.0           # W m^-2 K^-1 (custom_linear only)
    S_const: float = 1360.0     # solar constant, W m^-2
    dist_ratio_sq: float = 1.04  # (mean/current orbital distance)^2
    beta_minus: float = 0.3     # coalbedo over ice, dimensionless
    beta_plus: float = 0.7      # coalbedo over open water, dimensionless
    T_minus: float = 250.0      # ramp start, K
    T_plus: float = 280.0       # ramp end, K
    cosz_base: float = 0.5
    cosz_contrast: float = 0.5

    def validate(self) -> None:
        if self.mode not in ("constant", "budyko_sellers", "custom_linear"):
            raise ParamError(f"[shortwave] mode: unknown mode {self.mode!r}")
        if not self.T_minus < self.T_plus:
            raise ParamError("[shortwave] T_minus/T_plus: need T_minus < T_plus")
        if not 0.0 <= self.beta_minus <= self.beta_plus <= 1.0:
            raise ParamError("[shortwave] beta_minus/beta_plus: need "
                             "0 <= beta_minus <= beta_plus <= 1")
        if self.S_const < 0.0 or self.dist_ratio_sq <= 0.0:
            raise ParamError("[shortwave] S_const/dist_ratio_sq: must be "
                             ">= 0 and > 0")

    @property
    def ramp_slope(self) -> float:
        """Coalbedo Lipschitz constant (beta_plus - beta_minus)/(T_plus - T_minus)."""
        return (self.beta_plus - self.beta_minus) / (self.T_plus - self.T_minus)

    @property
    def cosz_max(self) -> float:
        """Largest value of the zenith profile over the channel."""
        hi = max(self.cosz_base - self.cosz_contrast,
                 self.cosz_base + self.cosz_contrast)
        return min(max(hi, 0.0), 1.0)


def coalbedo(cfg: ShortwaveConfig, T):
    """Piecewise-linear coalbedo ramp; accepts scalars or arrays (K)."""
    import numpy as np
    T = np.asarray(T, dtype=float)
    ramp = cfg.beta_minus + cfg.ramp_slope * (T - cfg.T_minus)
    return np.clip(ramp, cfg.beta_minus, cfg.beta_plus)


def coalbedo_slope(cfg: ShortwaveConfig, T):
    """dC/dT for the ramp, lower-branch rule at the two corners.

    The derivative is 0 for T <= T_minus and the ramp slope for
    T_minus < T <= T_plus: at each corner the value from the colder side
    applies, which is the branch the tangent-linear model uses.
    """
    import numpy as np
    T = np.asarray(T, dtype=float)
    return np.where((T > cfg.T_minus) & (T <= cfg.T_plus), cfg.ramp_slope, 0.0)


def shortwave_lipschitz_bound(cfg: ShortwaveConfig) -> float:
    """Lipschitz constant (W m^-2 K^-1) of the ocean shortwave term in T_o.

    For the coalbedo mode this is
    max_y [dist_ratio_sq * cosZ(y)] * S_const * ramp_slope; for the linear
    mode it is |R2_o|; a constant shortwave field has zero slope.
    """
    cfg.validate()
    if cfg.mode == "constant":
        return 0.0
    if cfg.mode == "custom_linear":
        return abs(cfg.R2_o)
    return cfg.dist_ratio_sq * cfg.cosz_max * cfg.S_const * cfg.ramp_slope


# ---------------------------------------------------------------------------
# radiative equilibrium (homogeneous reference temperatures)
# ---------------------------------------------------------------------------

def _mean_balance_residual(params: PhysicalParams, Ta, To, Ra0, Ro0):
    lam, sig, eps = params.lambda_heat, params.sigma_B, params.eps_a
    ea4 = abs(Ta) ** 3 * Ta
    eo4 = abs(To) ** 3 * To
    f1 = lam * (To - Ta) + eps * sig * (eo4 - 2.0 * ea4) + Ra0
    f2 = lam * (Ta - To) + sig * (eps * ea4 - eo4) + Ro0
    return f1, f2


def radiative_equilibrium(params: PhysicalParams, Ra0: float, Ro0: float,
                          max_iter: int = 100) -> tuple:
    """Homogeneous reference temperatures (T_a0, T_o0) in K.

    Solves the two-row mean thermodynamic balance (heat exchange + longwave
    + constant shortwave Ra0/Ro0 per channel) by damped Newton iteration from
    the black-body guess ((Ra0+Ro0)/sigma_B)^(1/4). The Newton step is halved
    until the residual norm decreases, which keeps the quartic terms from
    overshooting on cold starts. Residuals are driven below 1e-9 relative to
    max(1, Ra0 + Ro0).

    Raises :class:`NonConvergence` after ``max_iter`` iterations.
    """
    if Ra0 < 0.0 or Ro0 < 0.0:
        raise ParamError("[shortwave] Ra0/Ro0: mean forcing must be >= 0")
    lam, sig, eps = params.lambda_heat, params.sigma_B, params.eps_a
    scale = max(1.0, Ra0 + Ro0)
    tol = 1e-9 * scale

    guess = ((Ra0 + Ro0) / sig) ** 0.25
    Ta, To = guess, guess
    f1, f2 = _mean_balance_residual(params, Ta, To, Ra0, Ro0)
    res = math.hypot(f1, f2)
    for _ in range(max_iter):
        if res < tol:
            return Ta, To
        # Jacobian of (f1, f2) wrt (Ta, To); d(T|T|^3)/dT = 4|T|^3
        a3, o3 = 4.0 * abs(Ta) ** 3, 4.0 * abs(To) ** 3
        j11 = -lam - 2.0 * eps * sig * a3
        j12 = lam + eps * sig * o3
        j21 = lam + eps * sig * a3
        j22 = -lam - sig * o3
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            raise NonConvergence(
                f"singular Jacobian at (T_a, T_o) = ({Ta}, {To}), "
                f"residual {res:.3e}")
        dTa = -(f1 * j22 - f2 * j12) / det
        dTo = -(j11 * f2 - j21 * f1) / det
        step = 1.0
        while True:
            t1, t2 = Ta + step * dTa, To + step * dTo
            g1, g2 = _mean_balance_residual(params, t1, t2, Ra0, Ro0)
            new_res = math.hypot(g1, g2)
            if new_res < res or step < 1e-12:
                break
            step *= 0.5
        Ta, To, f1, f2, res = t1, t2, g1, g2, new_res
    if res < tol:
        return Ta, To
    raise NonConvergence(
        f"radiative equilibrium did not converge in {max_iter} iterations; "
        f"final residual {res:.3e} W m^-2 (tolerance {tol:.3e})")


# ---------------------------------------------------------------------------
# determining-modes admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeterminingModesReport:
    varsigma: float             # uniform-in-modes damping floor, s^-1
    varsigma_argmin: str        # which friction channel attains the min
    lipschitz_ok: bool          # shortwave slope < heat-exchange coefficient
    unconditional: bool         # enslavement holds with no mode threshold
    eps_star: float | None      # admissible coupling scale, s^(1/2); None if unconditional
    N_order_estimate: float | None  # L^2/(nu_S eps_star^2); None if unconditional


def determining_modes_constants(params: PhysicalParams, cfg: ShortwaveConfig,
                                lambda_1: float, C_rho: float) -> DeterminingModesReport:
    """Evaluate the ocean-temperature enslavement conditions.

    lambda_1 is the smallest Laplacian eigenvalue of the basis (m^-2),
    supplied by the caller (see ``SpectralBasis.lambda_1``); C_rho is an
    empirical or bound-based Gronwall constant (s^-1) for the trajectory
    ball under study.
    """
    der = derive(params)
    candidates = {
        "interlayer k_d/2": params.k_d / 2.0,
        "internal k_d'": params.k_d_prime,
        "internal/thermal k_d' lam1 R*^2/(4 f0^2 mu gamma_a)":
            params.k_d_prime * lambda_1 * params.R_star ** 2
            / (4.0 * params.f0 ** 2 * der.mu * params.gamma_a),
        "bottom r/2": params.r / 2.0,
        "bottom/Rossby r L_R^2 lam1/2":
            params.r * params.L_R ** 2 * lambda_1 / 2.0,
    }
    argmin = min(candidates, key=candidates.get)
    varsigma = candidates[argmin]
    lipschitz_ok = shortwave_lipschitz_bound(cfg) < params.lambda_heat
    if C_rho <= varsigma:
        return DeterminingModesReport(varsigma, argmin, lipschitz_ok,
                                      unconditional=True, eps_star=None,
                                      N_order_estimate=None)
    eps_star = (C_rho - varsigma) ** -0.5
    n_order = params.L ** 2 / (params.nu_S * eps_star ** 2)
    return DeterminingModesReport(varsigma, argmin, lipschitz_ok,
                                  unconditional=False, eps_star=eps_star,
                                  N_order_estimate=n_order)


def params_as_dict(params: PhysicalParams) -> dict:
    """Field-name -> value mapping (insertion order = declaration order)."""
    return {f.name: getattr(params, f.name) for f in fields(params)}


def with_updates(params: PhysicalParams, **kw) -> PhysicalParams:
    """Functional update helper; unknown names raise ParamError."""
    valid = {f.name for f in fields(params)}
    for name in kw:
        if name not in valid:
            raise ParamError(f"[physical] {name}: unknown parameter")
    return replace(params, **kw)


if __name__ == "__main__":
    p = PhysicalParams()
    d = derive(p)
    print("derived constants at defaults:")
    print(f"  kappa          = {d.kappa:.6f}")
    print(f"  mu             = {d.mu:.6e}")
    print(f"  mu*gamma_a     = {d.mu * p.gamma_a:.6f}")
    print(f"  mu*gamma_o     = {d.mu * p.gamma_o:.6f}")
    print(f"  a_sq           = {d.a_sq:.6e}")
    print(f"  temp_coeff     = {d.temp_coeff:.6e}")
    print(f"  eps_a_tilde    = {d.eps_a_tilde:.6f}")
    print(f"  d_wind         = {p.d_wind:.6e}")
    sw = ShortwaveConfig()
    print(f"  shortwave Lip. = {shortwave_lipschitz_bound(sw):.6f}")
