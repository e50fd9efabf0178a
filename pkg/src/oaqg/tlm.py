"""Tangent-linear dynamics along a reference trajectory.

linearized_tendency applies the Frechet derivative of the full nonlinear
tendency: every Jacobian splits into J(delta, .) + J(., delta), the
quartic longwave kernel T|T|^3 linearizes to 4|T|^3 dT, the coalbedo ramp
contributes its piecewise slope (lower branch at the corners), and the
linear terms act on the tangent unchanged. The same explicit/implicit
split as the nonlinear tendency applies, so a tangent co-evolves under
the identical IMEX scheme as its base trajectory.

lyapunov_spectrum estimates Lyapunov exponents by the classic repeated
re-orthonormalization of a small tangent bundle. Orthonormalization runs
in the energy-weighted metric of the prognostic pairing (blocks weighted
by lambda_a, lambda_a + a^2, lambda_o + 1/L_R^2, 1) so that stretching
factors measure volumes in the same phase space as the norms; a flag
switches to plain coefficient space for comparison. The sum of the first
n instantaneous stretching rates, time-averaged, is the trace proxy used
to locate n_star, the first bundle size whose volumes contract.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .params import ParamError, coalbedo_slope
from .model import Model, State, Tendency, NumericsError, _EQ_NAMES
from .stepping import Cnab2Stepper

__all__ = ["linearized_tendency", "metric_weights", "random_tangent",
           "propagate_tangent", "LyapunovResult", "lyapunov_spectrum",
           "trace_of_linearization"]


def linearized_tendency(model: Model, base: State, tangent: State,
                        split: str = "full") -> Tendency:
    """Apply the linearization of the tendency at ``base`` to ``tangent``.

    The tangent rides in a State container (same blocks, the time slot is
    ignored). Raises ParamError on a block-shape mismatch and
    NumericsError if the result is not finite.
    """
    fl = model.flags
    b = model.basis
    ct, cc, co, th = base.blocks()
    ut, uc, uo, uh = tangent.blocks()
    if ut.shape != ct.shape or uo.shape != co.shape:
        raise ParamError("linearized_tendency: tangent shaped for a "
                         "different resolution")

    Lt, Lc = -model.lam_a * ct, -model.lam_a * cc
    Lo = -model.lam_o * co
    dLt, dLc = -model.lam_a * ut, -model.lam_a * uc
    dLo = -model.lam_o * uo

    rhs_t = np.zeros(model.n_atm)
    rhs_c = np.zeros(model.n_atm)
    rhs_o = np.zeros(model.n_ocn)
    dth = np.zeros(model.n_ocn)

    if fl.advection:
        T, To_ = b.jac_aaa, b.jac_ooo
        rhs_t -= (T.apply(ut, Lt) + T.apply(ct, dLt)
                  + T.apply(uc, Lc) + T.apply(cc, dLc))
        rhs_c -= (T.apply(uc, Lt) + T.apply(cc, dLt)
                  + T.apply(ut, Lc) + T.apply(ct, dLc)
                  - model.a2 * (T.apply(ut, cc) + T.apply(ct, uc)))
        rhs_o -= To_.apply(uo, Lo) + To_.apply(co, dLo)
        dth -= To_.apply(uo, th) + To_.apply(co, uh)

    if fl.beta:
        rhs_t -= model.betah * (b.dx_atm @ ut)
        rhs_c -= model.betah * (b.dx_atm @ uc)
        rhs_o -= model.betah * (b.dx_ocn @ uo)

    if fl.interlayer_friction:
        lap_o_on_atm = b.cross_mass @ (model.lam_o * uo)
        rhs_t -= model.khat_d2 * (-model.lam_a * uc + lap_o_on_atm)
        rhs_c -= model.khat_d2 * (-model.lam_a * ut + lap_o_on_atm)
        rhs_o += model.dhat * (b.cross_mass.T @ (-model.lam_a * (ut + uc)))

    # thermodynamic linearization; grid anomalies of the tangent
    need_grid = fl.longwave or (
        fl.shortwave and model.shortwave.mode == "budyko_sellers")
    if need_grid:
        dTa_g = -model.Ea @ uc
        dTo_g = model.Eo @ uh
        Ta_g, To_g = model._temps_on_grid(base)

    dqa_n = dqo_n = None
    if fl.longwave:
        eps = model.params.eps_a
        slope_a = 4.0 * np.abs(Ta_g) ** 3
        slope_o = 4.0 * np.abs(To_g) ** 3
        dqa_n = model.sig_a * eps * (slope_o * dTo_g - 2.0 * slope_a * dTa_g)
        dqo_n = model.sig_o * (eps * slope_a * dTa_g - slope_o * dTo_g)

    dra_n = dro_n = None
    if fl.shortwave:
        sw = model.shortwave
        if sw.mode == "budyko_sellers":
            ramp = coalbedo_slope(sw, To_g * model.scales.temp)
            dro_n = model.Po @ (model.q_o_grid * ramp
                                * model.scales.temp * dTo_g)
        elif sw.mode == "custom_linear":
            dra_n = -model.R2a_lin * uc
            dro_n = model.R2o_lin * uh

    if model.a2 != 0.0:
        dga = np.zeros(model.n_atm)
        if fl.heat_exchange:
            dga += model.lamh_a * (b.cross_mass @ uh + uc)
        if fl.longwave:
            dga += model.Pa @ dqa_n
        if dra_n is not None:
            dga += dra_n
        rhs_c += model.a2 * dga
    if fl.heat_exchange:
        dth += model.lamh_o * (-b.cross_mass.T @ uc - uh)
    if fl.longwave:
        dth += model.Po @ dqo_n
    if dro_n is not None:
        dth += dro_n

    if split == "full":
        g_t, g_c, g_o, r_th = model.vorticity_diag
        rhs_t = rhs_t + g_t * ut
        rhs_c = rhs_c + g_c * uc
        rhs_o = rhs_o + g_o * uo
        dth = dth - r_th * uh
    elif split != "explicit":
        raise ParamError(f"linearized_tendency: unknown split {split!r}")

    tend = Tendency(-rhs_t / model.D1, -rhs_c / model.D2,
                    -rhs_o / model.D3, dth)
    for name, arr in zip(_EQ_NAMES, tend.blocks()):
        if not np.all(np.isfinite(arr)):
            raise NumericsError(
                f"non-finite tangent tendency in the {name} equation")
    return tend


# -- tangent bundle machinery ------------------------------------------------

def metric_weights(model: Model, metric: str = "dweighted") -> np.ndarray:
    """Flat per-coefficient weights of the orthonormalization metric."""
    if metric == "euclidean":
        return np.ones(2 * model.n_atm + 2 * model.n_ocn)
    if metric != "dweighted":
        raise ParamError(f"[tlm] metric: unknown metric {metric!r}")
    return np.concatenate([model.D1, model.D2, model.D3,
                           np.ones(model.n_ocn)])


def _flat(state: State) -> np.ndarray:
    return np.concatenate(state.blocks())


def _unflat(model: Model, x: np.ndarray, t: float = 0.0) -> State:
    na, no = model.n_atm, model.n_ocn
    return State(x[:na].copy(), x[na:2 * na].copy(),
                 x[2 * na:2 * na + no].copy(), x[2 * na + no:].copy(), t=t)


def random_tangent(model: Model, seed: int) -> State:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2 * model.n_atm + 2 * model.n_ocn)
    return _unflat(model, v / np.linalg.norm(v))


def propagate_tangent(model: Model, state0: State, tangent0: State,
                      horizon: float, dt: float):
    """Co-evolve one tangent vector along the trajectory from state0.

    horizon and dt in seconds. Returns (state, tangent) at the end of
    the window; the tangent advances under the same IMEX discretization
    as the bundle in lyapunov_spectrum (CN diagonal, AB2 remainder,
    backward-Euler bootstrap), with no renormalization, so it is only
    suitable for horizons without large net stretching.
    """
    if dt <= 0.0:
        raise ParamError("[tlm] dt: must be > 0")
    base = state0.copy()
    stepper = Cnab2Stepper(model, dt)
    dt_nd = dt * model.params.f0
    flat_rates = np.concatenate(model.implicit_rates)
    cn_num = 1.0 - 0.5 * dt_nd * flat_rates
    cn_den = 1.0 + 0.5 * dt_nd * flat_rates
    euler_den = 1.0 + dt_nd * flat_rates
    q = _flat(tangent0)
    hist = None
    for _ in range(round(horizon / dt)):
        f = np.concatenate(
            linearized_tendency(model, base, _unflat(model, q),
                                split="explicit").blocks())
        if hist is None:
            q = (q + dt_nd * f) / euler_den
        else:
            q = (q * cn_num + dt_nd * (1.5 * f - 0.5 * hist)) / cn_den
        hist = f
        base = stepper.step(base)
    return base, _unflat(model, q, t=base.t)


def _mgs(Q: np.ndarray, w: np.ndarray, rng, companion=None,
         valid=None, collapse_tol: float = 1e-13):
    """Modified Gram-Schmidt in the w-weighted inner product, in place.

    Returns the diagonal stretching factors. The same column operations
    are applied to the optional companion matrix: tangent histories are
    linear in the tangent, so transforming them alongside the bundle
    keeps a multistep scheme exact across renormalizations. A column
    that collapses onto the span of its predecessors is re-seeded
    randomly (with a warning), its factor reported as NaN so the caller
    can skip that interval, and its ``valid`` slot cleared so the caller
    re-bootstraps its history.
    """
    n = Q.shape[1]
    diag = np.empty(n)
    for k in range(n):
        for j in range(k):
            coef = (w * Q[:, j]) @ Q[:, k]
            Q[:, k] -= coef * Q[:, j]
            if companion is not None:
                companion[:, k] -= coef * companion[:, j]
        nrm = math.sqrt((w * Q[:, k]) @ Q[:, k])
        if nrm < collapse_tol:
            warnings.warn(f"tangent vector {k} collapsed; re-seeding")
            diag[k] = np.nan
            Q[:, k] = rng.standard_normal(Q.shape[0])
            for j in range(k):
                Q[:, k] -= ((w * Q[:, j]) @ Q[:, k]) * Q[:, j]
            nrm = math.sqrt((w * Q[:, k]) @ Q[:, k])
            if valid is not None:
                valid[k] = False
        else:
            diag[k] = nrm
        Q[:, k] /= nrm
        if companion is not None and np.isfinite(diag[k]):
            companion[:, k] /= nrm
    return diag


@dataclass
class LyapunovResult:
    """Lyapunov estimates, all rates in 1/s.

    exponents: sorted non-increasing; trace_avg[n-1]: time-averaged sum
    of the first n instantaneous stretching rates (bundle order);
    n_star: smallest n with trace_avg < 0, None if volumes never
    contract; ky_dimension: Kaplan-Yorke interpolation of the sorted
    exponents. A vector that collapsed in every interval carries no
    estimate: its exponent is NaN (sorted last) and it is excluded from
    ky_dimension.
    """

    exponents: np.ndarray
    trace_avg: np.ndarray
    ky_dimension: float
    n_star: int | None
    final_state: State


def _ky_dimension(lam_sorted: np.ndarray) -> float:
    lam_sorted = lam_sorted[np.isfinite(lam_sorted)]
    if lam_sorted.size == 0 or lam_sorted[0] < 0.0:
        return 0.0
    csum = np.cumsum(lam_sorted)
    if csum[-1] >= 0.0:
        return float(lam_sorted.size)   # saturated: need more vectors
    j = int(np.nonzero(csum < 0.0)[0][0])   # first partial sum below zero
    return j + float(csum[j - 1] / abs(lam_sorted[j])) if j > 0 else 0.0


def lyapunov_spectrum(model: Model, state0: State, n_vectors: int,
                      spinup: float, horizon: float, renorm_every: int,
                      dt: float, metric: str = "dweighted", seed: int = 0,
                      sink=None) -> LyapunovResult:
    """Estimate the leading Lyapunov exponents along one trajectory.

    spinup, horizon, and dt are in seconds; renorm_every counts steps
    between re-orthonormalizations. The base trajectory and the tangent
    bundle advance under the same IMEX scheme (CN diagonal, AB2
    remainder). sink, if given, receives one record per
    renormalization: (time_s, instantaneous rates 1/s, running exponent
    estimates 1/s).
    """
    dim = 2 * model.n_atm + 2 * model.n_ocn
    if not 0 <= n_vectors <= dim:
        raise ParamError(f"[tlm] n_vectors: need 0..{dim}, "
                         f"got {n_vectors}")
    if renorm_every < 1:
        raise ParamError("[tlm] renorm_every: must be >= 1")
    if dt <= 0.0:
        raise ParamError("[tlm] dt: must be > 0")

    base = state0.copy()
    stepper = Cnab2Stepper(model, dt)
    n_spin = round(spinup / dt)
    for _ in range(n_spin):
        base = stepper.step(base)

    if n_vectors == 0:
        return LyapunovResult(np.empty(0), np.empty(0), 0.0, None, base)

    rng = np.random.default_rng(seed)
    w = metric_weights(model, metric)
    Q = rng.standard_normal((dim, n_vectors))
    _mgs(Q, w, rng)

    dt_nd = dt * model.params.f0
    rates = model.implicit_rates
    flat_rates = np.concatenate(rates)
    cn_num = 1.0 - 0.5 * dt_nd * flat_rates
    cn_den = 1.0 + 0.5 * dt_nd * flat_rates
    euler_den = 1.0 + dt_nd * flat_rates

    n_steps = round(horizon / dt)
    if n_steps < renorm_every:
        raise ParamError("[tlm] horizon: shorter than one "
                         "renormalization interval")

    acc_log = np.zeros(n_vectors)
    acc_time = np.zeros(n_vectors)
    hist = np.zeros((dim, n_vectors))
    hist_valid = np.zeros(n_vectors, dtype=bool)

    for k in range(1, n_steps + 1):
        for i in range(n_vectors):
            tangent = _unflat(model, Q[:, i])
            f = np.concatenate(
                linearized_tendency(model, base, tangent,
                                    split="explicit").blocks())
            if not hist_valid[i]:
                Q[:, i] = (Q[:, i] + dt_nd * f) / euler_den
                hist_valid[i] = True
            else:
                Q[:, i] = (Q[:, i] * cn_num
                           + dt_nd * (1.5 * f - 0.5 * hist[:, i])) / cn_den
            hist[:, i] = f
        base = stepper.step(base)

        if k % renorm_every == 0 or k == n_steps:
            diag = _mgs(Q, w, rng, companion=hist, valid=hist_valid)
            span_nd = (renorm_every if k % renorm_every == 0
                       else k % renorm_every) * dt_nd
            logs = np.log(diag)
            ok = np.isfinite(logs)
            acc_log[ok] += logs[ok]
            acc_time[ok] += span_nd
            if sink is not None:
                inst = logs / span_nd * model.params.f0
                with np.errstate(invalid="ignore"):
                    running = acc_log / acc_time * model.params.f0
                sink(base.t / model.params.f0, inst, running)

    with np.errstate(invalid="ignore"):
        expo = acc_log / acc_time * model.params.f0
    trace_avg = np.cumsum(expo)
    lam_sorted = -np.sort(-expo)        # descending, NaN (no estimate) last
    below = np.nonzero(trace_avg < 0.0)[0]
    n_star = int(below[0]) + 1 if below.size else None
    return LyapunovResult(lam_sorted, trace_avg, _ky_dimension(lam_sorted),
                          n_star, base)


def trace_of_linearization(model: Model, state: State,
                           split: str = "full") -> float:
    """Trace of the linearized operator at one state, 1/s.

    Summed over the plain coefficient basis; the trace is
    basis-independent, so this is directly comparable with the sum of
    all Lyapunov exponents of a complete bundle.
    """
    dim = 2 * model.n_atm + 2 * model.n_ocn
    tr = 0.0
    e = np.zeros(dim)
    for k in range(dim):
        e[k] = 1.0
        out = np.concatenate(
            linearized_tendency(model, state, _unflat(model, e),
                                split=split).blocks())
        tr += out[k]
        e[k] = 0.0
    return tr * model.params.f0
