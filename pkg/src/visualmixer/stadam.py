"""ST-Adam: Adam-style moment estimates without the bias-correction rescale.

Both optimizers are written as pure state transitions on numpy vectors so
trajectories can be compared step by step.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

DIVERGENCE_LIMIT = 1e12


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class StAdamParams:
    eta: float = 1e-3
    beta: float = 0.9
    gamma: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if not 0 <= self.beta < 1 or not 0 <= self.gamma < 1:
            raise OptimizerError("decay coefficients must lie in [0, 1)")
        if not self.eta > 0 or not self.epsilon > 0:
            raise OptimizerError("eta and epsilon must be positive")
        if self.weight_decay < 0:
            raise OptimizerError("weight decay must be non-negative")


@dataclass(frozen=True)
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "OptimizerState":
        return cls(np.zeros(dim), np.zeros(dim), 0)


def _moments(w, g, s: OptimizerState, p: StAdamParams):
    w = np.asarray(w, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if w.shape != g.shape or w.shape != s.m.shape or w.shape != s.v.shape:
        raise OptimizerError(f"dimension mismatch: w{w.shape} g{g.shape} m{s.m.shape} v{s.v.shape}")
    if not np.all(np.isfinite(g)):
        raise OptimizerError("gradient has non-finite components")
    m = p.beta * s.m + (1.0 - p.beta) * g
    v = p.gamma * s.v + (1.0 - p.gamma) * g * g
    return w, m, v


def st_adam_step(w, g, s: OptimizerState, p: StAdamParams):
    """One ST-Adam update. Returns (w', s')."""
    w, m, v = _moments(w, g, s, p)
    w_new = w - p.eta * m / (np.sqrt(v) + p.epsilon) - p.eta * p.weight_decay * w
    return w_new, OptimizerState(m, v, s.t + 1)


def adam_step(w, g, s: OptimizerState, p: StAdamParams):
    """Reference Adam: same moments, rescaled by 1 - beta^t and 1 - gamma^t."""
    w, m, v = _moments(w, g, s, p)
    t = s.t + 1
    m_hat = m / (1.0 - p.beta**t)
    v_hat = v / (1.0 - p.gamma**t)
    w_new = w - p.eta * m_hat / (np.sqrt(v_hat) + p.epsilon) - p.eta * p.weight_decay * w
    return w_new, OptimizerState(m, v, t)


STEPS = {"st-adam": st_adam_step, "adam": adam_step}


@dataclass
class Trajectory:
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    w: np.ndarray | None = None
    converged: bool = False

    @property
    def steps(self) -> int:
        return len(self.losses) - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,loss,grad_norm\n")
        for i, (f, gn) in enumerate(zip(self.losses, self.grad_norms)):
            buf.write(f"{i},{f!r},{gn!r}\n")
        return buf.getvalue()


def optimize(f, grad, w0, p: StAdamParams = StAdamParams(), max_iters: int = 10_000,
             tol: float = 1e-8, optimizer: str = "st-adam", noise=None) -> Trajectory:
    """Iterate an optimizer from w0 until ||g|| <= tol or max_iters.

    `noise(step, g)` may perturb the gradient the optimizer sees; the stopping
    test and recorded norms use the clean gradient.
    """
    step = STEPS[optimizer]
    w = np.asarray(w0, dtype=np.float64).copy()
    s = OptimizerState.zeros(w.size)
    traj = Trajectory()
    for it in range(max_iters + 1):
        loss = float(f(w))
        if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            raise OptimizerError(f"diverged at step {it}: loss={loss}")
        g = np.asarray(grad(w), dtype=np.float64)
        gn = float(np.linalg.norm(g))
        traj.losses.append(loss)
        traj.grad_norms.append(gn)
        if gn <= tol:
            traj.converged = True
            break
        if it == max_iters:
            break
        seen = g if noise is None else noise(it, g)
        w, s = step(w, seen, s, p)
    traj.w = w
    return traj


# ---------------------------------------------------------------- test objectives

def quadratic(w):
    return 0.5 * float(np.dot(w, w))


def quadratic_grad(w):
    return np.asarray(w, dtype=np.float64)


def rosenbrock(w):
    x, y = w
    return (1 - x) ** 2 + 100 * (y - x * x) ** 2


def rosenbrock_grad(w):
    x, y = w
    return np.array([-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)])


PROFILES = {
    "quadratic": (quadratic, quadratic_grad, (5.0, 5.0)),
    "rosenbrock": (rosenbrock, rosenbrock_grad, (-1.2, 1.0)),
}

# Oscillation profile: ill-conditioned quadratic pull plus heavy-tailed noise.
OSC_CURVATURE = (1.0, 10.0, 0.1, 3.0)
OSC_START = (2.0, -2.0, 2.0, -2.0)
OSC_AMPLITUDE = 2.0
OSC_STEPS = 3000
OSC_THRESHOLD = 1e-2


def oscillation_objective():
    a = np.array(OSC_CURVATURE)
    return (lambda w: 0.5 * float(np.dot(a * w, w))), (lambda w: a * np.asarray(w))


def oscillation_noise(seed: int, amplitude: float, steps: int, dim: int):
    """Pre-drawn Student-t (3 dof) gradient noise, so both optimizers see the same sequence."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    table = amplitude * gen.standard_t(3, size=(steps + 1, dim))
    return lambda step, g: g + table[step]


@dataclass
class BenchmarkRow:
    optimizer: str
    final_loss: float
    tail_variance: float
    steps_to_threshold: int | None


@dataclass
class BenchmarkReport:
    seed: int
    amplitude: float
    rows: list[BenchmarkRow]

    def row(self, name: str) -> BenchmarkRow:
        return next(r for r in self.rows if r.optimizer == name)

    @property
    def st_adam_tie_or_better(self) -> bool:
        st, ad = self.row("st-adam"), self.row("adam")
        return st.tail_variance <= ad.tail_variance

    def to_text(self) -> str:
        lines = [f"seed={self.seed} amplitude={self.amplitude!r} steps={OSC_STEPS} threshold={OSC_THRESHOLD!r}",
                 "optimizer,final_loss,tail_variance,steps_to_threshold"]
        for r in self.rows:
            lines.append(f"{r.optimizer},{r.final_loss!r},{r.tail_variance!r},"
                         f"{'' if r.steps_to_threshold is None else r.steps_to_threshold}")
        lines.append(f"st_adam_tie_or_better={str(self.st_adam_tie_or_better).lower()}")
        return "\n".join(lines) + "\n"


def oscillation_benchmark(seed: int = 42, amplitude: float = OSC_AMPLITUDE,
                          p: StAdamParams = StAdamParams(eta=0.01), steps: int = OSC_STEPS) -> BenchmarkReport:
    """Run ST-Adam and Adam on the same noisy quadratic and compare their tails."""
    f, grad = oscillation_objective()
    noise = oscillation_noise(seed, amplitude, steps, len(OSC_START))
    rows = []
    for name in ("st-adam", "adam"):
        traj = optimize(f, grad, OSC_START, p, max_iters=steps, tol=0.0, optimizer=name,
                        noise=None if amplitude == 0 else noise)
        losses = np.array(traj.losses)
        tail = losses[-max(1, len(losses) // 10):]
        hit = np.nonzero(losses <= OSC_THRESHOLD)[0]
        rows.append(BenchmarkRow(name, float(losses[-1]), float(tail.var()),
                                 int(hit[0]) if hit.size else None))
    return BenchmarkReport(seed, amplitude, rows)


def with_eta(p: StAdamParams, eta: float) -> StAdamParams:
    return replace(p, eta=eta)
