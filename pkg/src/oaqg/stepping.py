"""Time integration.

The workhorse scheme is CNAB2: Crank-Nicolson on the per-mode linear
diagonal (viscosity, diffusion, and the frictional diagonal, which after
the inversion operator is a scalar rate per mode, so the implicit solve is
a division) and Adams-Bashforth 2 on everything else (Jacobians, beta,
cross couplings, radiation). The first step bootstraps with IMEX Euler,
a documented one-step order reduction. A classical explicit RK4 is kept
as a cross-validation reference.

Configuration times are SI seconds; internally everything runs in solver
units (time scaled by 1/f0).
"""

from dataclasses import dataclass

import numpy as np

from .params import ParamError
from .model import Model, State, Tendency, NumericsError

__all__ = [
    "SchemeConfig", "RunResult", "OverflowAbort", "SinkAbort",
    "Cnab2Stepper", "Rk4Stepper", "make_stepper", "integrate",
]

SCHEMES = ("imex_cnab2", "rk4_explicit")


@dataclass(frozen=True)
class SchemeConfig:
    """Integration settings. dt and t_end are SI seconds; t_end is the run
    length, rounded to the nearest whole number of steps."""

    dt: float
    t_end: float = 0.0
    scheme: str = "imex_cnab2"
    output_every: int = 1
    overflow_cap: float = 1e6   # max |coefficient| in solver units

    def validate(self) -> None:
        if not self.dt > 0.0:
            raise ParamError("[numerics] dt: must be > 0")
        if self.t_end < 0.0:
            raise ParamError("[numerics] t_end: must be >= 0")
        if self.scheme not in SCHEMES:
            raise ParamError(f"[numerics] scheme: expected one of {SCHEMES},"
                             f" got {self.scheme!r}")
        if self.output_every < 1:
            raise ParamError("[numerics] output_every: must be >= 1")
        if not self.overflow_cap > 0.0:
            raise ParamError("[numerics] overflow_cap: must be > 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class OverflowAbort(RuntimeError):
    """A coefficient passed the overflow cap (or went non-finite).

    Carries the last valid state and the 1-based index of the failed step.
    """

    def __init__(self, message, state: State, step_index: int):
        super().__init__(message)
        self.state = state
        self.step_index = step_index


class SinkAbort(RuntimeError):
    """A diagnostic sink raised; carries the state reached so callers can
    checkpoint before propagating."""

    def __init__(self, message, state: State, step_index: int):
        super().__init__(message)
        self.state = state
        self.step_index = step_index


class Cnab2Stepper:
    """CN on the linear diagonal, AB2 on the explicit remainder."""

    def __init__(self, model: Model, dt_seconds: float):
        self.model = model
        self.dt = dt_seconds * model.params.f0
        rates = model.implicit_rates
        self.cn_num = tuple(1.0 - 0.5 * self.dt * r for r in rates)
        self.cn_den = tuple(1.0 + 0.5 * self.dt * r for r in rates)
        self.euler_den = tuple(1.0 + self.dt * r for r in rates)
        self.history: Tendency | None = None

    def step(self, state: State) -> State:
        f = self.model.tendency(state, split="explicit")
        dt = self.dt
        if self.history is None:
            new = [(y + dt * fi) / d for y, fi, d in
                   zip(state.blocks(), f.blocks(), self.euler_den)]
        else:
            new = [(y * num + dt * (1.5 * fi - 0.5 * hi)) / den
                   for y, fi, hi, num, den in
                   zip(state.blocks(), f.blocks(), self.history.blocks(),
                       self.cn_num, self.cn_den)]
        self.history = f
        return State(*new, t=state.t + dt)


class Rk4Stepper:
    """Classical explicit RK4 on the full tendency (reference scheme)."""

    def __init__(self, model: Model, dt_seconds: float):
        self.model = model
        self.dt = dt_seconds * model.params.f0
        self.history = None   # stateless; kept for interface symmetry

    def _shift(self, state: State, k: Tendency, h: float) -> State:
        return State(*[y + h * ki for y, ki in
                       zip(state.blocks(), k.blocks())], t=state.t)

    def step(self, state: State) -> State:
        m, dt = self.model, self.dt
        k1 = m.tendency(state)
        k2 = m.tendency(self._shift(state, k1, 0.5 * dt))
        k3 = m.tendency(self._shift(state, k2, 0.5 * dt))
        k4 = m.tendency(self._shift(state, k3, dt))
        new = [y + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
               for y, a, b, c, d in zip(state.blocks(), k1.blocks(),
                                        k2.blocks(), k3.blocks(),
                                        k4.blocks())]
        return State(*new, t=state.t + dt)


def make_stepper(model: Model, cfg: SchemeConfig):
    cfg.validate()
    if cfg.scheme == "imex_cnab2":
        return Cnab2Stepper(model, cfg.dt)
    return Rk4Stepper(model, cfg.dt)


@dataclass
class RunResult:
    """Final state plus what a bit-exact continuation needs."""

    state: State
    steps: int
    history: Tendency | None   # AB2 explicit tendency at the last step


def integrate(model: Model, state0: State, cfg: SchemeConfig,
              sinks=(), history: Tendency | None = None) -> RunResult:
    """Advance state0 by cfg.t_end.

    Sinks are callables sink(step, state) invoked for the initial state
    (step 0), every output_every-th step, and the final step. Passing the
    history block from a previous RunResult resumes AB2 exactly, making
    split runs bit-identical to uninterrupted ones.
    """
    cfg.validate()
    stepper = make_stepper(model, cfg)
    if history is not None and isinstance(stepper, Cnab2Stepper):
        stepper.history = history
    n = cfg.n_steps
    state = state0.copy()
    _emit(sinks, 0, state)
    for k in range(1, n + 1):
        prev = state
        try:
            state = stepper.step(state)
        except NumericsError as exc:
            raise OverflowAbort(str(exc), prev, k) from exc
        worst = max(np.max(np.abs(b), initial=0.0) for b in state.blocks())
        if not np.isfinite(worst) or worst > cfg.overflow_cap:
            raise OverflowAbort(
                f"coefficient magnitude {worst:.3e} exceeded the overflow "
                f"cap {cfg.overflow_cap:.3e} at step {k}", prev, k)
        if k % cfg.output_every == 0 or k == n:
            _emit(sinks, k, state)
    return RunResult(state=state, steps=n, history=stepper.history)


def _emit(sinks, step: int, state: State) -> None:
    for sink in sinks:
        try:
            sink(step, state)
        except Exception as exc:
            raise SinkAbort(f"diagnostic sink failed at step {step}: {exc}",
                            state, step) from exc
