"""Command-line front end.

Subcommands map one-to-one onto library operations: simulate (forced
run with budget series and checkpoint), equilibrium (reference
temperatures), constants (derived constants with their defining
formulas), tlm (Lyapunov exponents), sync (nudged twin), continuity
(initial-state twin), param-sweep (radiation-parameter ladder),
converge (resolution ladder), validate (built-in oracle suite).

Exit codes: 0 success, 2 configuration errors, 3 numerical aborts.
Errors print to stderr as single lines, ``error: <kind>: <detail>``.
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .params import (PhysicalParams, ShortwaveConfig, ParamError,
                     NonConvergence, derive, radiative_equilibrium,
                     determining_modes_constants, shortwave_lipschitz_bound,
                     with_updates)
from .model import (Model, ModelFlags, State, NumericsError,
                    pure_jacobian_flags)
from .basis import ResolutionSpec, gravest_eigenvalue
from .stepping import SchemeConfig, OverflowAbort, SinkAbort, integrate
from . import diagnostics as dg
from . import tlm
from . import experiments as ex
from .config import RunConfig, read_config, config_hash
from . import persist as ps

__all__ = ["main", "cli"]

# dev-tuned experiment defaults (trajectory seeds and horizons in units
# of 1/f0; resolved to seconds once the config is loaded)
SYNC_DEFAULTS = dict(n_obs=36, gamma_nudge=1.0e3, observe_temperature=False,
                     horizon_nd=9000.0, dt_nd=0.05, output_every=4000,
                     slave_seed=29, spinup_nd=400.0)
CONTINUITY_DEFAULTS = dict(eps=1e-8, seed=3, horizon_nd=30.0, dt_nd=0.02,
                           output_every=5, spinup_nd=400.0)
SWEEP_DEFAULTS = dict(param="eps_a", deltas="1e-4,2e-4,4e-4,8e-4",
                      horizon_nd=2.0, dt_nd=0.02, output_every=20,
                      spinup_nd=400.0)
CONVERGE_DEFAULTS = dict(ladder="2x2/2x2,3x3/3x3,4x4/4x4,6x6/6x6",
                         horizon_nd=3.0, dt_nd=0.02, seed=2)
TLM_DEFAULTS = dict(n_vectors=4, spinup_nd=400.0, horizon_nd=600.0,
                    renorm_every=10, dt_nd=0.02, seed=1, metric="dweighted")
C_RHO_DEMO = 1.0e34   # 1/s; representative Gronwall constant for reports


def _load(args) -> RunConfig:
    cfg = read_config(getattr(args, "params", None))
    if getattr(args, "resolution", None):
        cfg.res = ResolutionSpec.parse(args.resolution)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _build_model(cfg: RunConfig, flags: ModelFlags | None = None) -> Model:
    return Model(cfg.params, cfg.shortwave, cfg.res, flags=flags,
                 grid_factor=cfg.grid_factor,
                 kappa_convention=cfg.kappa_convention)


def _pick(flag_value, cfg: RunConfig, section: str, key: str, fallback):
    if flag_value is not None:
        return flag_value
    return cfg.extras.get(section, {}).get(key, fallback)


def _jsonable(rec: dict) -> dict:
    out = {}
    for k, v in rec.items():
        v = float(v) if isinstance(v, (np.floating, np.integer)) else v
        if isinstance(v, float) and v != v:
            v = None
        out[k] = v
    return out


class _Artifacts:
    """Collects written paths and finishes with one manifest."""

    def __init__(self, outdir, cfg: RunConfig, emit: str):
        self.dir = Path(outdir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.emit = emit
        self.paths = []
        self.started = time.time()
        copy = self.dir / "config.cfg"
        copy.write_text(cfg.text, encoding="utf-8")
        self.paths.append(str(copy))
        self.hash = config_hash(cfg.text)
        self.seed = cfg.seed

    def series(self, name, records):
        path = self.dir / f"{name}.{self.emit}"
        ps.write_series(path, [_jsonable(r) for r in records], self.emit)
        self.paths.append(str(path))
        return path

    def checkpoint(self, name, state, res_str, history=None):
        path = self.dir / name
        ps.write_checkpoint(path, state, res_str, self.hash, history)
        self.paths.append(str(path))
        return path

    def finish(self, exit_status=0):
        man = ps.RunManifest(config_hash=self.hash, seed=self.seed,
                             revision=ps.revision_string(),
                             started=self.started, finished=time.time(),
                             exit_status=exit_status,
                             artifacts=list(self.paths))
        path = self.dir / "manifest.json"
        ps.write_manifest(path, man)
        return path


# -- simulate -------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.out is None:
        args.out = "oaqg-run"
    num = cfg.numerics
    updates = {}
    if args.t_end is not None:
        updates["t_end"] = args.t_end
    if args.dt is not None:
        updates["dt"] = args.dt
    if args.output_every is not None:
        updates["output_every"] = args.output_every
    if args.scheme is not None:
        updates["scheme"] = args.scheme
    if updates:
        num = replace(num, **updates)
    num.validate()

    model = _build_model(cfg)
    state0 = model.random_state(cfg.seed)
    art = _Artifacts(args.out, cfg, args.emit)
    budgets, extra = [], []

    def sink(step, st):
        budgets.append(dg.energy_budget(model, st))
        extra.append({"w_norm": dg.w_norm(model, st),
                      "s_norm": dg.s_norm(model, st)})

    try:
        run = integrate(model, state0, num, sinks=[sink])
    except (OverflowAbort, SinkAbort) as exc:
        art.checkpoint("emergency-checkpoint.txt", exc.state, str(cfg.res))
        _write_budget_series(art, budgets, extra)
        art.finish(exit_status=3)
        raise

    _write_budget_series(art, budgets, extra)
    art.checkpoint("checkpoint.txt", run.state, str(cfg.res),
                   history=run.history)
    manifest = art.finish()
    print(f"steps {run.steps}  final t {run.state.t / model.params.f0:.6e} s")
    print(f"w_norm {dg.w_norm(model, run.state):.6e} m^4 s^-2")
    for p in art.paths + [str(manifest)]:
        print(f"wrote {p}")
    return 0


def _write_budget_series(art, budgets, extra):
    if not budgets:
        return
    dg.attach_residuals(budgets)
    records = []
    for b, e in zip(budgets, extra):
        rec = b.as_dict()
        rec.update(e)
        records.append(rec)
    art.series("series", records)


# -- equilibrium / constants ------------------------------------------------


def cmd_equilibrium(args) -> int:
    cfg = _load(args)
    p = cfg.params
    if args.eps_a is not None:
        p = with_updates(p, eps_a=args.eps_a)
    if args.lambda_heat is not None:
        p = with_updates(p, lambda_heat=args.lambda_heat)
    Ta, To = radiative_equilibrium(p, args.ra0, args.ro0)
    print(f"T_a0 = {Ta:.4f} K")
    print(f"T_o0 = {To:.4f} K")
    return 0


def cmd_constants(args) -> int:
    cfg = _load(args)
    p = cfg.params
    d = derive(p)
    lam1 = gravest_eigenvalue(cfg.res, p)   # no advection tensors needed

    print("derived constants")
    print(f"  kappa = {d.kappa:.6g}  # rho_o h_o k_d / C_wind, "
          "dimensionless ocean energy weight")
    print(f"  mu = {d.mu:.6g}  # R_star^2 / (2 p^2 gamma_a sigma_stat), "
          "m^2 s^-2 K^-2")
    print(f"  mu*gamma_a = {d.mu * p.gamma_a:.6g}  # atmosphere "
          "temperature-evolution intensity, m^2 s^-2 K^-1")
    print(f"  mu*gamma_o = {d.mu * p.gamma_o:.6g}  # ocean "
          "temperature-evolution intensity, m^2 s^-2 K^-1")
    print(f"  nu_T = {d.nu_T:.6g}  # mu * nu_T_tilde, m^4 s^-3 K^-2")
    print(f"  eps_a_tilde = {d.eps_a_tilde:.6g}  # 0.7 min(eps_a, 1-eps_a)")
    print(f"  a_sq = {d.a_sq:.6g}  # 2 f0^2/(p_delta^2 sigma_stat), m^-2")
    print(f"  temp_coeff = {d.temp_coeff:.6g}  # 2 p f0/(R_star p_delta), "
          "K s m^-2")

    E = dg.analytic_energy_bound(p, cfg.shortwave, lam1)
    aset = dg.absorbing_set(p, lam1, E_bound=E, mode="analytic")
    print("absorbing set (analytic worst-case forcing)")
    print(f"  lambda_1 = {lam1:.6g}  # gravest basis eigenvalue, m^-2")
    print(f"  E_bound = {E:.6g}  # source constant, m^4 s^-3")
    print(f"  Lambda_0 = {aset.lambda_0:.6g}  # lambda_1 * weakest "
          f"dissipation channel ({aset.argmin}), 1/s")
    print(f"  rho_w_sq = {aset.rho_w_sq:.6g}  # 2 E / Lambda_0, m^4 s^-2 "
          "(worst-case ball; reported, not asserted)")

    rep = determining_modes_constants(p, cfg.shortwave, lam1,
                                      C_rho=C_RHO_DEMO)
    bound = shortwave_lipschitz_bound(cfg.shortwave)
    print("determining modes")
    print(f"  shortwave_slope_bound = {bound:.6g}  # sup |d(shortwave)/dT| "
          "over the ocean channel, W m^-2 K^-1")
    print(f"  lambda_heat = {p.lambda_heat:.6g}  # W m^-2 K^-1")
    print(f"  slope_below_lambda = {str(rep.lipschitz_ok).lower()}  "
          "# enslavement estimate applies")
    print(f"  varsigma = {rep.varsigma:.6g}  # weakest decay channel "
          f"({rep.varsigma_argmin}), 1/s")
    if rep.unconditional:
        print(f"  mode_count_bound = none needed  # C_rho = {C_RHO_DEMO:g} "
              "already below varsigma")
    else:
        print(f"  mode_count_bound ~ {rep.N_order_estimate:.3g}  "
              f"# L^2/(nu_S eps*^2) at C_rho = {C_RHO_DEMO:g} 1/s; "
              "worst-case overestimate, reported only")
    return 0


# -- tlm ---------------------------------------------------------------------


def cmd_tlm(args) -> int:
    cfg = _load(args)
    f0 = cfg.params.f0
    g = lambda key, fb: _pick(getattr(args, key), cfg, "tlm", key, fb)
    n_vectors = g("n_vectors", TLM_DEFAULTS["n_vectors"])
    renorm = g("renorm_every", TLM_DEFAULTS["renorm_every"])
    metric = g("metric", TLM_DEFAULTS["metric"])
    bundle_seed = _pick(args.bundle_seed, cfg, "tlm", "seed",
                        TLM_DEFAULTS["seed"])
    spinup = _pick(args.spinup, cfg, "tlm", "spinup",
                   TLM_DEFAULTS["spinup_nd"] / f0)
    horizon = _pick(args.horizon, cfg, "tlm", "horizon",
                    TLM_DEFAULTS["horizon_nd"] / f0)
    dt = _pick(args.dt, cfg, "tlm", "dt", TLM_DEFAULTS["dt_nd"] / f0)

    model = _build_model(cfg)
    records = []

    def sink(t_s, rates, running):
        rec = {"time": t_s}
        rec.update({f"rate_{i + 1}": r for i, r in enumerate(rates)})
        rec.update({f"exponent_{i + 1}": r for i, r in enumerate(running)})
        records.append(rec)

    out = tlm.lyapunov_spectrum(model, model.random_state(cfg.seed),
                                n_vectors=n_vectors, spinup=spinup,
                                horizon=horizon, renorm_every=renorm,
                                dt=dt, metric=metric, seed=bundle_seed,
                                sink=sink)
    for i, lam in enumerate(out.exponents, start=1):
        print(f"exponent_{i} = {lam:.6e}  # 1/s")
    print(f"ky_dimension = {out.ky_dimension:.4f}")
    print(f"n_star = {out.n_star}")
    if args.out:
        art = _Artifacts(args.out, cfg, args.emit)
        art.series("renorm", records)
        art.finish()
        print(f"wrote {art.dir}")
    return 0


# -- experiments ---------------------------------------------------------------


def _spun_state(model, seed, spinup_s, dt_s):
    cfg = SchemeConfig(dt=dt_s, t_end=spinup_s, output_every=10 ** 9)
    return integrate(model, model.random_state(seed), cfg).state


def cmd_sync(args) -> int:
    cfg = _load(args)
    f0 = cfg.params.f0
    pick = lambda key, fb: _pick(getattr(args, key), cfg, "sync", key, fb)
    n_obs = pick("n_obs", SYNC_DEFAULTS["n_obs"])
    gamma = pick("gamma_nudge", SYNC_DEFAULTS["gamma_nudge"])
    observe_t = pick("observe_temperature",
                     SYNC_DEFAULTS["observe_temperature"])
    horizon = pick("horizon", SYNC_DEFAULTS["horizon_nd"] / f0)
    dt = pick("dt", SYNC_DEFAULTS["dt_nd"] / f0)
    every = pick("output_every", SYNC_DEFAULTS["output_every"])
    slave_seed = pick("slave_seed", SYNC_DEFAULTS["slave_seed"])
    spinup = pick("spinup", SYNC_DEFAULTS["spinup_nd"] / f0)

    model = _build_model(cfg)
    master = _spun_state(model, cfg.seed, spinup, dt)
    slave = model.random_state(slave_seed)
    rep = ex.run_sync(model, master, slave,
                      ex.NudgingConfig(n_obs=n_obs, gamma_nudge=gamma,
                                       observe_temperature=bool(observe_t)),
                      SchemeConfig(dt=dt, t_end=horizon,
                                   output_every=every))
    th = rep.component_diffs["theta_o"]
    print(f"w_norm_diff initial {rep.w_norm_diff[0]:.6e} "
          f"final {rep.w_norm_diff[-1]:.6e}")
    print(f"theta_o diff ratio = {th[-1] / th[0]:.6e}")
    print(f"envelope_rate = {rep.envelope_rate:.6e}  # 1/s")
    if args.out:
        art = _Artifacts(args.out, cfg, args.emit)
        recs = [{"time": t, "w_norm_diff": w,
                 **{k: rep.component_diffs[k][i] for k in rep.component_diffs}}
                for i, (t, w) in enumerate(zip(rep.times, rep.w_norm_diff))]
        art.series("sync", recs)
        art.finish()
        print(f"wrote {art.dir}")
    return 0


def cmd_continuity(args) -> int:
    cfg = _load(args)
    f0 = cfg.params.f0
    pick = lambda key, fb: _pick(getattr(args, key), cfg, "continuity",
                                 key, fb)
    eps = pick("eps", CONTINUITY_DEFAULTS["eps"])
    pert_seed = pick("pert_seed", CONTINUITY_DEFAULTS["seed"])
    horizon = pick("horizon", CONTINUITY_DEFAULTS["horizon_nd"] / f0)
    dt = pick("dt", CONTINUITY_DEFAULTS["dt_nd"] / f0)
    every = pick("output_every", CONTINUITY_DEFAULTS["output_every"])
    spinup = pick("spinup", CONTINUITY_DEFAULTS["spinup_nd"] / f0)

    model = _build_model(cfg)
    base = _spun_state(model, cfg.seed, spinup, dt)
    pert = tlm.random_tangent(model, pert_seed)
    pert = State(*[eps * b for b in pert.blocks()], t=base.t)
    rep = ex.run_continuity(model, base, pert,
                            SchemeConfig(dt=dt, t_end=horizon,
                                         output_every=every))
    print(f"w_norm_diff initial {rep.w_norm_diff[0]:.6e} "
          f"max {rep.w_norm_diff.max():.6e}")
    print(f"envelope_rate = {rep.envelope_rate:.6e}  # 1/s")
    if args.out:
        art = _Artifacts(args.out, cfg, args.emit)
        art.series("continuity",
                   [{"time": t, "w_norm_diff": w}
                    for t, w in zip(rep.times, rep.w_norm_diff)])
        art.finish()
        print(f"wrote {art.dir}")
    return 0


def cmd_param_sweep(args) -> int:
    cfg = _load(args)
    f0 = cfg.params.f0
    pick = lambda key, fb: _pick(getattr(args, key), cfg, "sweep", key, fb)
    param = pick("param", SWEEP_DEFAULTS["param"])
    deltas_raw = pick("deltas", SWEEP_DEFAULTS["deltas"])
    horizon = pick("horizon", SWEEP_DEFAULTS["horizon_nd"] / f0)
    dt = pick("dt", SWEEP_DEFAULTS["dt_nd"] / f0)
    every = pick("output_every", SWEEP_DEFAULTS["output_every"])
    spinup = pick("spinup", SWEEP_DEFAULTS["spinup_nd"] / f0)
    try:
        deltas = [float(s) for s in str(deltas_raw).split(",") if s.strip()]
    except ValueError:
        raise ParamError(f"[sweep] deltas: expected comma-separated "
                         f"floats, got {deltas_raw!r}") from None

    model = _build_model(cfg)
    base = _spun_state(model, cfg.seed, spinup, dt)
    rep = ex.run_parameter_continuity(model, base, param, deltas,
                                      SchemeConfig(dt=dt, t_end=horizon,
                                                   output_every=every))
    for d, mx in rep.pairs:
        print(f"delta {d:.6e}  max_w_norm_diff {mx:.6e}")
    slope = "none" if rep.slope is None else f"{rep.slope:.4f}"
    print(f"slope = {slope}  # log-log distance vs delta")
    if args.out:
        art = _Artifacts(args.out, cfg, args.emit)
        art.series("sweep", [{"delta": d, "max_w_norm_diff": mx}
                             for d, mx in rep.pairs])
        art.finish()
        print(f"wrote {art.dir}")
    return 0


def cmd_converge(args) -> int:
    cfg = _load(args)
    f0 = cfg.params.f0
    pick = lambda key, fb: _pick(getattr(args, key), cfg, "converge",
                                 key, fb)
    ladder_raw = pick("ladder", CONVERGE_DEFAULTS["ladder"])
    horizon = pick("horizon", CONVERGE_DEFAULTS["horizon_nd"] / f0)
    dt = pick("dt", CONVERGE_DEFAULTS["dt_nd"] / f0)
    seed = pick("ic_seed", CONVERGE_DEFAULTS["seed"])
    ladder = [s.strip() for s in str(ladder_raw).split(",") if s.strip()]

    rep = ex.run_galerkin_convergence(
        cfg.params, cfg.shortwave, ladder,
        SchemeConfig(dt=dt, t_end=horizon, output_every=10 ** 9),
        seed=seed)
    for res_str, dist in zip(rep.resolutions[:-1], rep.distances):
        print(f"{res_str}  distance {dist:.6e}")
    print(f"reference {rep.resolutions[-1]}  w_norm "
          f"{rep.reference_w_norm:.6e}")
    mono = bool(np.all(np.diff(rep.distances) < 0))
    print(f"monotone = {str(mono).lower()}")
    if args.out:
        art = _Artifacts(args.out, cfg, args.emit)
        art.series("converge",
                   [{"resolution": r, "distance": d}
                    for r, d in zip(rep.resolutions[:-1], rep.distances)])
        art.finish()
        print(f"wrote {art.dir}")
    return 0


# -- validate -------------------------------------------------------------------


def _check_jacobian(cfg: RunConfig):
    """Advection-only energy conservation plus embedding consistency."""
    pure = Model(cfg.params, cfg.shortwave, ResolutionSpec.parse("3x3/3x3"),
                 flags=pure_jacobian_flags())
    worst = 0.0
    for seed in range(5):
        st = pure.random_state(seed=seed, psi_amp=2.0, theta_amp=1.0)
        rate = dg.energy_rate(pure, st, pure.tendency(st))
        drift = abs(rate) / (pure.params.f0 * max(dg.energy(pure, st), 1.0))
        worst = max(worst, drift)
    if worst > 1e-10:
        return False, f"advection energy drift {worst:.3e} > 1e-10 per unit"

    noradiation = ModelFlags(longwave=False, shortwave=False)
    coarse = Model(cfg.params, cfg.shortwave,
                   ResolutionSpec.parse("3x3/3x3"), flags=noradiation)
    fine = Model(cfg.params, cfg.shortwave, ResolutionSpec.parse("5x5/5x5"),
                 flags=noradiation)
    worst = 0.0
    for seed in range(5):
        st = coarse.random_state(seed=seed, psi_amp=2.0, theta_amp=1.0)
        tc = coarse.tendency(st)
        tf = fine.tendency(ex.project_state(st, coarse, fine))
        for name, fam_c, fam_f in (("psi_t", coarse.basis.atm, fine.basis.atm),
                                   ("psi_c", coarse.basis.atm, fine.basis.atm),
                                   ("psi_o", coarse.basis.ocn, fine.basis.ocn),
                                   ("theta_o", coarse.basis.ocn,
                                    fine.basis.ocn)):
            a = getattr(tc, name)
            b = getattr(tf, name)[[fam_f.index[lab]
                                   for lab in fam_c.labels]]
            worst = max(worst, float(np.abs(a - b).max()
                                     / max(np.abs(a).max(), 1e-300)))
    if worst > 1e-10:
        return False, f"embedding mismatch {worst:.3e} > 1e-10"
    return True, f"drift and embedding within 1e-10 (worst {worst:.3e})"


def _check_tlm(cfg: RunConfig):
    """Nonlinear twin difference against the propagated tangent."""
    model = _build_model(cfg)
    f0 = model.params.f0
    dt = 0.02 / f0
    base = _spun_state(model, cfg.seed, 100.0 / f0, dt)
    pert = tlm.random_tangent(model, 3)
    pert = State(*[1e-6 * b for b in pert.blocks()], t=base.t)
    rep = ex.run_continuity(model, base, pert,
                            SchemeConfig(dt=dt, t_end=5.0 / f0,
                                         output_every=10 ** 9))
    _, tangent = tlm.propagate_tangent(model, base.copy(), pert,
                                       5.0 / f0, dt)
    ratio = float(np.sqrt(rep.w_norm_diff[-1] / dg.w_norm(model, tangent)))
    if not 0.95 < ratio < 1.05:
        return False, f"tangent/nonlinear distance ratio {ratio:.4f} " \
                      "outside [0.95, 1.05]"
    return True, f"tangent/nonlinear distance ratio {ratio:.4f}"


def _budget_residuals(model, state0, dt_s):
    budgets = []
    integrate(model, state0, SchemeConfig(dt=dt_s, t_end=86400.0,
                                          output_every=4),
              sinks=[lambda k, s: budgets.append(dg.energy_budget(model, s))])
    dg.attach_residuals(budgets)
    return budgets


def _check_budget(cfg: RunConfig):
    """Budget closure order under time-step halving at matched times."""
    model = _build_model(cfg)
    st = model.random_state(seed=21, psi_amp=1e-3, theta_amp=1e-3)
    coarse = _budget_residuals(model, st, 1200.0)
    fine = _budget_residuals(model, st, 600.0)
    ratios = [coarse[i].ddt_residual / fine[2 * i].ddt_residual
              for i in range(2, len(coarse) - 2)]
    order = float(np.log2(np.median(ratios)))
    if order < 1.8:
        return False, f"closure order {order:.2f} < 1.8"
    return True, f"closure order {order:.2f}"


def cmd_validate(args) -> int:
    cfg = _load(args)
    checks = [("jacobian", _check_jacobian), ("tlm", _check_tlm),
              ("budget", _check_budget)]
    failed = 0
    for name, fn in checks:
        ok, detail = fn(cfg)
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
        failed += 0 if ok else 1
    return 1 if failed else 0


# -- wiring ---------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", metavar="FILE",
                        help="parameter file (defaults to the packaged one)")
    common.add_argument("--resolution", metavar="KxN/MxP",
                        help="override the truncation")
    common.add_argument("--seed", type=int, help="initial-state seed")
    common.add_argument("--emit", choices=("ndjson", "csv"),
                        default="ndjson", help="series format")
    common.add_argument("--out", metavar="DIR",
                        help="artifact directory (required for simulate)")

    p = argparse.ArgumentParser(prog="oaqg", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common],
                       help="forced run with budget series and checkpoint")
    s.add_argument("--t-end", dest="t_end", type=float, metavar="S")
    s.add_argument("--dt", type=float, metavar="S")
    s.add_argument("--output-every", dest="output_every", type=int)
    s.add_argument("--scheme", choices=("imex_cnab2", "rk4_explicit"))
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("equilibrium", parents=[common],
                       help="homogeneous reference temperatures")
    s.add_argument("--ra0", type=float, default=170.0, metavar="W_M2")
    s.add_argument("--ro0", type=float, default=170.0, metavar="W_M2")
    s.add_argument("--eps-a", dest="eps_a", type=float)
    s.add_argument("--lambda-heat", dest="lambda_heat", type=float)
    s.set_defaults(func=cmd_equilibrium)

    s = sub.add_parser("constants", parents=[common],
                       help="derived constants with defining formulas")
    s.set_defaults(func=cmd_constants)

    s = sub.add_parser("tlm", parents=[common],
                       help="Lyapunov exponents from a tangent bundle")
    s.add_argument("--n-vectors", dest="n_vectors", type=int)
    s.add_argument("--spinup", type=float, metavar="S")
    s.add_argument("--horizon", type=float, metavar="S")
    s.add_argument("--renorm-every", dest="renorm_every", type=int)
    s.add_argument("--dt", type=float, metavar="S")
    s.add_argument("--bundle-seed", dest="bundle_seed", type=int)
    s.add_argument("--metric", choices=("dweighted", "euclidean"))
    s.set_defaults(func=cmd_tlm)

    s = sub.add_parser("sync", parents=[common],
                       help="nudged twin (determining-modes experiment)")
    s.add_argument("--n-obs", dest="n_obs", type=int)
    s.add_argument("--gamma-nudge", dest="gamma_nudge", type=float)
    s.add_argument("--observe-temperature", dest="observe_temperature",
                   action="store_const", const=True)
    s.add_argument("--horizon", type=float, metavar="S")
    s.add_argument("--dt", type=float, metavar="S")
    s.add_argument("--output-every", dest="output_every", type=int)
    s.add_argument("--slave-seed", dest="slave_seed", type=int)
    s.add_argument("--spinup", type=float, metavar="S")
    s.set_defaults(func=cmd_sync)

    s = sub.add_parser("continuity", parents=[common],
                       help="twin run from a perturbed initial state")
    s.add_argument("--eps", type=float)
    s.add_argument("--pert-seed", dest="pert_seed", type=int)
    s.add_argument("--horizon", type=float, metavar="S")
    s.add_argument("--dt", type=float, metavar="S")
    s.add_argument("--output-every", dest="output_every", type=int)
    s.add_argument("--spinup", type=float, metavar="S")
    s.set_defaults(func=cmd_continuity)

    s = sub.add_parser("param-sweep", parents=[common],
                       help="twin runs over a radiation-parameter ladder")
    s.add_argument("--param", choices=ex.PARAM_LADDER_NAMES)
    s.add_argument("--deltas", metavar="D1,D2,...")
    s.add_argument("--horizon", type=float, metavar="S")
    s.add_argument("--dt", type=float, metavar="S")
    s.add_argument("--output-every", dest="output_every", type=int)
    s.add_argument("--spinup", type=float, metavar="S")
    s.set_defaults(func=cmd_param_sweep)

    s = sub.add_parser("converge", parents=[common],
                       help="self-convergence along a resolution ladder")
    s.add_argument("--ladder", metavar="R1,R2,...")
    s.add_argument("--horizon", type=float, metavar="S")
    s.add_argument("--dt", type=float, metavar="S")
    s.add_argument("--ic-seed", dest="ic_seed", type=int)
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("validate", parents=[common],
                       help="built-in oracle suite; nonzero exit on failure")
    s.set_defaults(func=cmd_validate)
    return p


def cli(argv=None) -> int:
    """Run one subcommand; returns the exit code (0, 2, or 3)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParamError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (OverflowAbort, SinkAbort, NumericsError, NonConvergence) as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 3


def main() -> int:
    return cli()
