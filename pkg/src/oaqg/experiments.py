"""Twin-run experiments over the coupled model.

Four scripted studies, each reducing a qualitative statement about the
flow to a measured curve: continuous dependence on the initial state,
Lipschitz dependence on radiation parameters, enslavement of the ocean
temperature under streamfunction-only spectral nudging, and Galerkin
self-convergence along a resolution ladder.

Every experiment is deterministic given its configuration and seeds.
Twins advance in lockstep with the same scheme and step so their output
grids align exactly.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .params import (PhysicalParams, ShortwaveConfig, ParamError,
                     shortwave_lipschitz_bound, with_updates)
from .model import Model, ModelFlags, State
from .basis import ResolutionSpec
from .stepping import SchemeConfig, Cnab2Stepper, integrate, OverflowAbort
from . import diagnostics as dg

__all__ = ["TwinReport", "NudgingConfig", "GalerkinReport",
           "run_continuity", "run_parameter_continuity", "run_sync",
           "run_galerkin_convergence", "project_state"]

PARAM_LADDER_NAMES = ("eps_a", "lambda_heat", "shortwave_amplitude")


@dataclass
class TwinReport:
    """Difference history of a twin run.

    times are seconds; w_norm_diff is the squared weak norm of the state
    difference (same convention as diagnostics.w_norm), with the t=0
    entry computed from the configured perturbation itself so it matches
    that norm exactly. envelope_rate is the least-squares slope of
    log(w_norm_diff) against time, 1/s (NaN when the difference never
    leaves zero). Parameter studies fill pairs with (delta, max_t
    w_norm_diff) and slope with the log-log fit of the weak-norm
    DISTANCE (square root of the stored maxima) over positive rungs, so
    Lipschitz dependence reads as slope 1; run_sync fills
    component_diffs with per-block difference norms (square roots of
    the w_norm pieces) keyed psi_t/psi_c/psi_o/theta_o.
    """

    times: np.ndarray
    w_norm_diff: np.ndarray
    envelope_rate: float
    pairs: list | None = None
    slope: float | None = None
    component_diffs: dict | None = None


@dataclass
class NudgingConfig:
    """Spectral nudging toward a master trajectory.

    n_obs lowest-eigenvalue modes of each streamfunction family are
    relaxed at gamma_nudge (1/s); the ocean temperature is only touched
    when observe_temperature is set.
    """

    n_obs: int
    gamma_nudge: float
    observe_temperature: bool = False

    def validate(self):
        if self.n_obs < 0:
            raise ParamError("[experiments] n_obs: must be >= 0, "
                             f"got {self.n_obs}")
        if not self.gamma_nudge >= 0.0:
            raise ParamError("[experiments] gamma_nudge: must be >= 0, "
                             f"got {self.gamma_nudge}")


@dataclass
class GalerkinReport:
    """Self-convergence along a resolution ladder.

    distances[i] is the weak-norm distance (square root of w_norm of the
    difference, evaluated on the finest basis) between rung i's final
    state and the finest run's final state; reference_w_norm is the
    squared weak norm of the finest final state for scale.
    """

    resolutions: tuple
    distances: np.ndarray
    reference_w_norm: float


def _difference(a: State, b: State) -> State:
    return State(*[x - y for x, y in zip(a.blocks(), b.blocks())], t=a.t)


def _collect(model, state0, cfg):
    """Integrate and keep a copy of the state at every emission step."""
    seen = {}
    integrate(model, state0, cfg,
              sinks=[lambda k, s: seen.setdefault(k, s.copy())])
    return [seen[k] for k in sorted(seen)]


def _fit_rate(times_s, diffs):
    good = diffs > 0.0
    if good.sum() < 2:
        return float("nan")
    return float(np.polyfit(times_s[good], np.log(diffs[good]), 1)[0])


def _times_seconds(states, f0):
    return np.array([s.t / f0 for s in states])


def run_continuity(model: Model, base_ic: State, perturbation: State,
                   cfg: SchemeConfig) -> TwinReport:
    """Twin run from base_ic and base_ic + perturbation.

    A zero perturbation is legal and yields an identically zero
    difference curve with NaN envelope rate.
    """
    cfg.validate()
    twin_ic = State(*[y + d for y, d in zip(base_ic.blocks(),
                                            perturbation.blocks())],
                    t=base_ic.t)
    base_states = _collect(model, base_ic.copy(), cfg)
    twin_states = _collect(model, twin_ic, cfg)
    diffs = np.array([dg.w_norm(model, _difference(a, b))
                      for a, b in zip(twin_states, base_states)])
    diffs[0] = dg.w_norm(model, perturbation)
    times = _times_seconds(base_states, model.params.f0)
    return TwinReport(times, diffs, _fit_rate(times, diffs))


def _with_param(model: Model, name: str, delta: float) -> Model:
    if name == "eps_a":
        p2, sw2 = with_updates(model.params,
                               eps_a=model.params.eps_a + delta), \
            model.shortwave
    elif name == "lambda_heat":
        p2, sw2 = with_updates(model.params,
                               lambda_heat=model.params.lambda_heat + delta), \
            model.shortwave
    elif name == "shortwave_amplitude":
        s, fac = model.shortwave, 1.0 + delta
        p2 = model.params
        sw2 = replace(s, R1_a=s.R1_a * fac, R1_o=s.R1_o * fac,
                      R2_a=s.R2_a * fac, R2_o=s.R2_o * fac,
                      S_const=s.S_const * fac)
    else:
        raise ParamError("[experiments] param_name: one of "
                         f"{PARAM_LADDER_NAMES}, got {name!r}")
    return Model(p2, sw2, model.res, flags=model.flags)


def run_parameter_continuity(model: Model, ic: State, param_name: str,
                             deltas, cfg: SchemeConfig) -> TwinReport:
    """Twin runs differing only in one radiation parameter.

    deltas is a ladder of parameter increments (a geometric ladder makes
    the log-log slope meaningful). The stored difference curve belongs
    to the largest rung; pairs holds (delta, max_t w_norm_diff) for all
    rungs and slope the log-log fit over the positive ones.
    """
    cfg.validate()
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ParamError("[experiments] deltas: need at least one value")
    base_states = _collect(model, ic.copy(), cfg)
    times = _times_seconds(base_states, model.params.f0)
    pairs = []
    top_curve = None
    for d in deltas:
        twin_states = _collect(_with_param(model, param_name, d),
                               ic.copy(), cfg)
        curve = np.array([dg.w_norm(model, _difference(a, b))
                          for a, b in zip(twin_states, base_states)])
        pairs.append((d, float(curve.max())))
        if d == max(deltas):
            top_curve = curve
    ladder = np.array([(d, m) for d, m in pairs if d > 0.0 and m > 0.0])
    slope = (float(np.polyfit(np.log(ladder[:, 0]),
                              0.5 * np.log(ladder[:, 1]), 1)[0])
             if ladder.shape[0] >= 2 else None)
    return TwinReport(times, top_curve, _fit_rate(times, top_curve),
                      pairs=pairs, slope=slope)


def _lowest_mask(lam: np.ndarray, n_obs: int) -> np.ndarray:
    mask = np.zeros(lam.size)
    mask[np.argsort(lam, kind="stable")[:min(n_obs, lam.size)]] = 1.0
    return mask


class _NudgedCnab2:
    """Cnab2Stepper plus backward-Euler relaxation toward a master.

    The nudge -gamma P_N(c_slave - c_master), applied at the vorticity
    level and carried through the D^-1 preconditioning, is a per-mode
    linear diagonal. It is discretized backward Euler inside the CNAB2
    step (slave side fully implicit, master side at the new time level;
    the master advances first each step): unlike a CN treatment, this is
    L-stable, so a large gamma locks the observed modes onto the master
    instead of ringing, and a slave started equal to the master stays
    equal to round-off. The theta update with observe_temperature=False
    is the free stepper's expression, untouched by construction.
    """

    def __init__(self, model: Model, dt_seconds: float,
                 nudging: NudgingConfig):
        self.model = model
        self.dt = dt_seconds * model.params.f0
        gam = nudging.gamma_nudge / model.params.f0
        masks = [_lowest_mask(model.lam_a, nudging.n_obs),
                 _lowest_mask(model.lam_a, nudging.n_obs),
                 _lowest_mask(model.lam_o, nudging.n_obs)]
        self.g = [gam * mk / dv
                  for mk, dv in zip(masks, (model.D1, model.D2, model.D3))]
        self.g.append(gam * _lowest_mask(model.lam_o, nudging.n_obs)
                      if nudging.observe_temperature else None)
        self.cn_num, self.cn_den, self.euler_den = [], [], []
        for r, g in zip(model.implicit_rates, self.g):
            self.cn_num.append(1.0 - 0.5 * self.dt * r)
            if g is None:
                self.cn_den.append(1.0 + 0.5 * self.dt * r)
                self.euler_den.append(1.0 + self.dt * r)
            else:
                self.cn_den.append(1.0 + 0.5 * self.dt * r + self.dt * g)
                self.euler_den.append(1.0 + self.dt * (r + g))
        self.history = None

    def step(self, slave: State, m_next: State) -> State:
        f = self.model.tendency(slave, split="explicit")
        dt = self.dt
        new = []
        if self.history is None:
            for y, fi, g, mn, d in zip(slave.blocks(), f.blocks(),
                                       self.g, m_next.blocks(),
                                       self.euler_den):
                if g is None:
                    new.append((y + dt * fi) / d)
                else:
                    new.append((y + dt * (fi + g * mn)) / d)
        else:
            for y, fi, hi, g, mn, num, den in zip(
                    slave.blocks(), f.blocks(), self.history.blocks(),
                    self.g, m_next.blocks(), self.cn_num, self.cn_den):
                if g is None:
                    new.append((y * num + dt * (1.5 * fi - 0.5 * hi)) / den)
                else:
                    new.append((y * num + dt * (1.5 * fi - 0.5 * hi)
                                + dt * g * mn) / den)
        self.history = f
        return State(*new, t=slave.t + dt)


def run_sync(model: Model, master_ic: State, slave_ic: State,
             nudging: NudgingConfig, cfg: SchemeConfig) -> TwinReport:
    """Free master, nudged slave; reports per-component difference norms.

    With observe_temperature=False every path into theta_o goes through
    the coupled dynamics; the theta update expression is asserted
    identical to the free stepper's before integrating.
    """
    cfg.validate()
    nudging.validate()
    if cfg.scheme != "imex_cnab2":
        raise ParamError("[experiments] scheme: run_sync requires "
                         "imex_cnab2 (the nudge joins its implicit "
                         "diagonal)")
    if not shortwave_lipschitz_bound(model.shortwave) < model.params.lambda_heat:
        warnings.warn("shortwave temperature slope is not below the "
                      "heat-exchange rate; the enslavement bound does "
                      "not cover this configuration")

    slave_stepper = _NudgedCnab2(model, cfg.dt, nudging)
    if not nudging.observe_temperature:
        free = Cnab2Stepper(model, cfg.dt).step(slave_ic.copy())
        probe = _NudgedCnab2(model, cfg.dt, nudging).step(
            slave_ic.copy(), master_ic)
        assert np.array_equal(free.theta_o, probe.theta_o), \
            "nudging leaked into the theta_o update"

    master_stepper = Cnab2Stepper(model, cfg.dt)
    master, slave = master_ic.copy(), slave_ic.copy()
    n_steps = round(cfg.t_end / cfg.dt)
    keys = ("psi_t", "psi_c", "psi_o", "theta_o")
    times, totals = [], []
    comps = {k: [] for k in keys}

    def emit(step):
        d = _difference(slave, master)
        bad = [np.abs(b).max() for b in slave.blocks() + master.blocks()]
        if not np.isfinite(bad).all() or max(bad) > cfg.overflow_cap:
            raise OverflowAbort(f"sync overflow at step {step}", slave, step)
        times.append(master.t / model.params.f0)
        totals.append(dg.w_norm(model, d))
        for k, v in dg.w_norm_components(model, d).items():
            comps[k].append(np.sqrt(v))

    emit(0)
    for k in range(1, n_steps + 1):
        master = master_stepper.step(master)
        slave = slave_stepper.step(slave, master)
        if k % cfg.output_every == 0 or k == n_steps:
            emit(k)

    times = np.array(times)
    totals = np.array(totals)
    return TwinReport(times, totals, _fit_rate(times, totals),
                      component_diffs={k: np.array(v)
                                       for k, v in comps.items()})


def _shared_indices(src_fam, dst_fam):
    src_idx, dst_idx = [], []
    for i, lab in enumerate(src_fam.labels):
        j = dst_fam.index.get(lab)
        if j is not None:
            src_idx.append(i)
            dst_idx.append(j)
    return np.array(src_idx, dtype=int), np.array(dst_idx, dtype=int)


def project_state(state: State, src: Model, dst: Model) -> State:
    """Copy coefficients between resolutions by mode identity.

    Modes present only in dst stay zero; modes present only in src are
    dropped. Works as restriction (dst coarser) and embedding (dst
    finer) alike, since mode labels and normalizations do not depend on
    the truncation.
    """
    out = dst.zero_state()
    ia_s, ia_d = _shared_indices(src.basis.atm, dst.basis.atm)
    io_s, io_d = _shared_indices(src.basis.ocn, dst.basis.ocn)
    out.psi_t[ia_d] = state.psi_t[ia_s]
    out.psi_c[ia_d] = state.psi_c[ia_s]
    out.psi_o[io_d] = state.psi_o[io_s]
    out.theta_o[io_d] = state.theta_o[io_s]
    out.t = state.t
    return out


def run_galerkin_convergence(params: PhysicalParams,
                             shortwave: ShortwaveConfig, resolutions,
                             cfg: SchemeConfig, seed: int = 0,
                             flags: ModelFlags | None = None,
                             ic: State | None = None) -> GalerkinReport:
    """Same projected initial state run along a resolution ladder.

    The last entry is the reference; every coarser final state is
    embedded in the reference basis and its weak-norm distance to the
    reference final state reported, in ladder order. ``ic``, when
    given, must live on the finest rung's basis and replaces the
    seeded random initial state.
    """
    if len(resolutions) < 3:
        raise ParamError("[experiments] resolutions: need at least 3 "
                         f"rungs, got {len(resolutions)}")
    cfg.validate()
    specs = [r if isinstance(r, ResolutionSpec) else ResolutionSpec.parse(r)
             for r in resolutions]
    models = [Model(params, shortwave, s, flags=flags) for s in specs]
    fine = models[-1]
    ic_fine = ic.copy() if ic is not None else fine.random_state(seed)
    if ic_fine.psi_t.shape[0] != fine.n_atm:
        raise ParamError("[experiments] ic: expected a state on the "
                         f"finest rung ({specs[-1]})")
    finals = [integrate(m, project_state(ic_fine, fine, m), cfg).state
              for m in models]
    ref = finals[-1]
    dists = [np.sqrt(dg.w_norm(fine, _difference(project_state(st, m, fine),
                                                 ref)))
             for m, st in zip(models[:-1], finals[:-1])]
    return GalerkinReport(tuple(str(r) for r in resolutions),
                          np.array(dists), dg.w_norm(fine, ref))
