"""Benchmark harness: seeded episodes, per-step re-planning, discounted-return
aggregation and CSV output.

Config files are flat ``key = value`` lines with dotted sections, e.g.::

    env.type = rocksample        # rocksample | random | pomdp
    env.n = 7
    env.k = 8
    planner.type = fmp           # fmp | pomcp | random
    planner.horizon = 5
    planner.eps = 0.2            # one value (constant) or a comma list
    run.episodes = 50

Episode ``i`` runs with seed ``episode_seed(run.seed, i)``; results do not
depend on ``run.parallel``.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .discretization import (
    EpsilonSchedule,
    epsilon_schedule,
    grid_cell_count_log10,
    memory_bound_log10,
    plan_params,
)
from .envs import RandomPomdpSpec, RockSampleSpec, TabularEnv, generate_random_pomdp, rocksample_env
from .envs.rocksample import load_rock_layout
from .errors import ImpossibleObservation, ParticleDepletion
from .model import PomdpModel
from .planner import DepthStats, PlanConfig, plan
from .pomcp import ParticleBelief, TabularSimulator, UctConfig, particle_update, pomcp_plan
from .pomdp_io import load_pomdp_file
from .spaces import SamplingConfig

CSV_COLUMNS = ("episode", "seed", "return", "steps", "mean_plan_ms")
_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def episode_seed(master: int, index: int) -> int:
    """64-bit seed of episode ``index``: splitmix64(splitmix64(master) xor index)."""
    return splitmix64(splitmix64(master & _MASK64) ^ index)


# --------------------------------------------------------------------- config


@dataclass(frozen=True)
class EnvConfig:
    type: str = "rocksample"
    # rocksample
    n: int = 7
    k: int = 8
    layout: str = "standard"  # standard | random | path to a layout file
    half_efficiency_distance: float = 20.0
    # random POMDP
    states: int = 30
    sparsity: float = 0.3
    actions: int = 4
    reward_max: float = 1.0
    # .pomdp file
    path: str = ""
    normalize: bool = False
    seed: int = 0


@dataclass(frozen=True)
class PlannerSpec:
    type: str = "fmp"
    horizon: int | None = 5
    eps: tuple[float, ...] = (0.2,)
    target_error: float | None = None
    leaf: str = "0"  # number | midpoint | exit
    samples: int = 8
    mode: str = "exact"
    representative: str = "grid"
    max_nodes: int = 10**6
    # POMCP
    c: float = 10.0
    budget: int = 10_000
    depth: int = 90
    particles: int = 10_000


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    planner: PlannerSpec = field(default_factory=PlannerSpec)
    steps: int = 90
    discount: float = 0.95
    episodes: int = 50
    seed: int = 0
    parallel: int = 1
    note: str = ""

    def __post_init__(self):
        if self.steps < 0 or self.episodes < 1 or not 0 <= self.discount < 1:
            raise ValueError("need steps >= 0, episodes >= 1 and 0 <= discount < 1")


def _coerce(cls, name: str, raw: str):
    f = {x.name: x for x in fields(cls)}.get(name)
    if f is None:
        raise KeyError(name)
    t = str(f.type)
    if "tuple" in t:
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if raw.lower() == "none" and "None" in t:
        return None
    if t.startswith("int"):
        return int(raw)
    if t.startswith("float"):
        return float(raw)
    if t == "bool":
        return raw.lower() in ("1", "true", "yes", "on")
    return raw


_RUN_KEYS = {"steps": "steps", "gamma": "discount", "discount": "discount", "episodes": "episodes",
             "seed": "seed", "parallel": "parallel", "note": "note"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` config text (``#`` comments, dotted sections)."""
    env, planner, run = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        section, _, name = key.partition(".")
        try:
            if section == "env":
                env[name] = _coerce(EnvConfig, name, value)
            elif section in ("planner", "pomcp"):
                planner[name] = _coerce(PlannerSpec, name, value)
            elif section == "run" and name in _RUN_KEYS:
                target = _RUN_KEYS[name]
                run[target] = value if target == "note" else (
                    float(value) if target == "discount" else int(value))
            else:
                raise KeyError(key)
        except KeyError:
            raise ValueError(f"config line {lineno}: unknown key {key!r}") from None
    return ExperimentConfig(EnvConfig(**env), PlannerSpec(**planner), **run)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# --------------------------------------------------------------------- agents


def make_env(cfg: EnvConfig, discount: float):
    if cfg.type == "rocksample":
        positions, layout = None, cfg.layout
        if layout not in ("standard", "random"):
            positions, layout = load_rock_layout(layout), "random"
        spec = RockSampleSpec(cfg.n, cfg.k, positions, cfg.half_efficiency_distance,
                              seed=cfg.seed, discount=discount, layout=layout)
        return rocksample_env(spec)
    if cfg.type == "random":
        spec = RandomPomdpSpec(cfg.states, cfg.sparsity, cfg.actions, reward_max=cfg.reward_max,
                               discount=discount, seed=cfg.seed)
        return TabularEnv(generate_random_pomdp(spec))
    if cfg.type == "pomdp":
        model = load_pomdp_file(cfg.path, normalize=cfg.normalize)
        return TabularEnv(PomdpModel(model.transition, model.observation, model.expected_reward,
                                     model.reward_max, discount, model.scaling))
    raise ValueError(f"unknown env.type {cfg.type!r}")


def _leaf(spec: PlannerSpec, env, gamma: float):
    if spec.leaf == "exit":
        return env.space.exit_leaf_value
    if spec.leaf == "midpoint":
        return env.space.reward_max / (2 * (1 - gamma))
    return float(spec.leaf)


def make_plan_config(spec: PlannerSpec, env, gamma: float) -> PlanConfig:
    sampling = SamplingConfig(spec.mode, spec.samples)
    leaf = _leaf(spec, env, gamma)
    common = dict(leaf_value=leaf, sampling=sampling, gamma=gamma, max_nodes=spec.max_nodes,
                  representative=spec.representative)
    if spec.target_error is not None:
        return PlanConfig(target_error=spec.target_error, **common)
    horizon = spec.horizon if spec.horizon is not None else len(spec.eps) - 1
    eps = spec.eps if len(spec.eps) > 1 else spec.eps * (horizon + 1)
    return PlanConfig(schedule=EpsilonSchedule(eps), horizon=horizon, **common)


def node_margin_log10(stats: list[DepthStats]) -> float:
    """Smallest log10(cell bound / unique nodes) over the levels of one tree."""
    return min(s.log10_bound - math.log10(s.nodes) for s in stats)


class FmpAgent:
    def __init__(self, env, config: PlanConfig):
        self.env, self.config = env, config

    def reset(self, rng):
        self.belief = self.env.initial_belief()
        self.node_margin = math.inf

    def act(self, rng) -> int:
        res = plan(self.env.space, self.belief, self.config, rng=rng)
        self.node_margin = min(self.node_margin, node_margin_log10(res.stats))
        return res.action

    def update(self, a, o, rng):
        self.belief = self.env.update_belief(self.belief, a, o)


class PomcpAgent:
    """POMCP over particles; an exact belief is tracked only to reseed on depletion."""

    def __init__(self, env: TabularEnv, cfg: UctConfig, particles: int):
        self.env, self.cfg, self.capacity = env, cfg, particles
        self.sim = TabularSimulator(env.model)

    def reset(self, rng):
        self.exact = self.env.initial_belief()
        self.particles = ParticleBelief.from_distribution(self.exact, self.capacity, rng)

    def act(self, rng) -> int:
        return pomcp_plan(self.sim, self.particles, self.cfg, rng=rng).action

    def update(self, a, o, rng):
        self.exact = self.env.update_belief(self.exact, a, o)
        try:
            self.particles = particle_update(self.particles, a, o, self.sim, rng)
        except ParticleDepletion:
            self.particles = ParticleBelief.from_distribution(self.exact, self.capacity, rng)


class RandomAgent:
    def __init__(self, env):
        self.env = env

    def reset(self, rng):
        pass

    def act(self, rng) -> int:
        return int(rng.integers(self.env.num_actions))

    def update(self, a, o, rng):
        pass


def make_agent(spec: PlannerSpec, env, gamma: float):
    if spec.type == "fmp":
        return FmpAgent(env, make_plan_config(spec, env, gamma))
    if spec.type == "pomcp":
        if not isinstance(env, TabularEnv):
            raise ValueError("the POMCP baseline needs a tabular environment")
        return PomcpAgent(env, UctConfig(spec.c, spec.budget, spec.depth), spec.particles)
    if spec.type == "random":
        return RandomAgent(env)
    raise ValueError(f"unknown planner.type {spec.type!r}")


# ------------------------------------------------------------------- episodes


class EpisodeAborted(RuntimeError):
    pass


@dataclass
class EpisodeResult:
    seed: int
    discounted_return: float  # original reward units
    steps: int
    plan_times: list[float] = field(default_factory=list)  # seconds per decision
    scaled_return: float = 0.0  # planner reward units
    node_margin: float = math.inf  # log10(cell bound / nodes), worst level seen

    @property
    def mean_plan_ms(self) -> float:
        return 1000.0 * float(np.mean(self.plan_times)) if self.plan_times else 0.0


def run_episode(env, agent, steps: int, gamma: float, seed: int) -> EpisodeResult:
    """Plan, act, observe, filter; repeat for ``steps`` or until terminal."""
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    env_rng, agent_rng = np.random.default_rng(env_ss), np.random.default_rng(agent_ss)
    state = env.reset(env_rng)
    agent.reset(agent_rng)
    total = scaled = 0.0
    disc = 1.0
    times = []
    for t in range(steps):
        if env.is_terminal(state):
            break
        start = time.perf_counter()
        a = agent.act(agent_rng)
        times.append(time.perf_counter() - start)
        state, o, r = env.step(state, a, env_rng)
        total += disc * r
        scaled += disc * float(env.scaling.to_planner(r))
        disc *= gamma
        try:
            agent.update(a, o, agent_rng)
        except ImpossibleObservation as exc:
            raise EpisodeAborted(f"step {t}: observation {o} impossible under the agent's belief "
                                 f"(model/environment mismatch): {exc}") from exc
    n_steps = len(times)
    # after termination the planner-unit return keeps accruing the image of reward 0
    for _ in range(n_steps, steps):
        scaled += disc * float(env.scaling.to_planner(0.0))
        disc *= gamma
    return EpisodeResult(seed, total, n_steps, times, scaled, getattr(agent, "node_margin", math.inf))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    episodes: list[EpisodeResult]
    failures: list[tuple[int, str]]
    indices: list[int] = field(default_factory=list)

    @property
    def returns(self) -> np.ndarray:
        return np.array([e.discounted_return for e in self.episodes])

    @property
    def mean(self) -> float:
        return float(self.returns.mean()) if self.episodes else math.nan

    @property
    def sem(self) -> float:
        """Standard error of the mean over episodes."""
        r = self.returns
        return float(r.std(ddof=1) / math.sqrt(len(r))) if len(r) > 1 else 0.0


def _run_one(args) -> tuple[int, EpisodeResult | str]:
    config, index = args
    seed = episode_seed(config.seed, index)
    env = make_env(config.env, config.discount)
    agent = make_agent(config.planner, env, config.discount)
    try:
        return index, run_episode(env, agent, config.steps, config.discount, seed)
    except EpisodeAborted as exc:
        return index, str(exc)


def run_experiment(config: ExperimentConfig, parallel: int | None = None) -> ExperimentResult:
    """All episodes of ``config``, folded in episode order."""
    workers = config.parallel if parallel is None else parallel
    jobs = [(config, i) for i in range(config.episodes)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(j) for j in jobs]
    episodes, failures, order = [], [], []
    for index, out in outcomes:
        if isinstance(out, str):
            failures.append((index, out))
        else:
            episodes.append(out)
            order.append(index)
    return ExperimentResult(config, episodes, failures, order)


def format_csv(result: ExperimentResult, timings: bool = False) -> str:
    """Per-episode CSV. ``mean_plan_ms`` is left empty unless ``timings`` is set,
    so that default output is byte-for-byte reproducible."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for idx, ep in zip(result.indices, result.episodes):
        w.writerow([idx, ep.seed, repr(float(ep.discounted_return)), ep.steps,
                    f"{ep.mean_plan_ms:.3f}" if timings else ""])
    return buf.getvalue()


def summary_line(result: ExperimentResult) -> str:
    c = result.config
    return (f"{c.env.type} planner={c.planner.type} episodes={len(result.episodes)} "
            f"mean={result.mean:.4f} sem={result.sem:.4f} failures={len(result.failures)}")


# --------------------------------------------------------------------- bounds


def bounds_report(target_error: float, gamma: float, reward_max: float, dims) -> str:
    """Tree height, resolution schedule and log10 memory bounds as text."""
    p = plan_params(target_error, gamma, reward_max)
    sched = epsilon_schedule(p.epsilon_b0, gamma, p.horizon)
    lines = [
        f"target_error = {target_error:g}  gamma = {gamma:g}  R_max = {reward_max:g}",
        f"h0 = {p.horizon_real:.6f}  (tree height {p.horizon})",
        f"eps_b0 = {p.epsilon_b0:.6g}",
        "eps_d = " + ", ".join(f"{e:.6g}" for e in sched.epsilons),
    ]
    for dim in dims:
        lines.append(f"dim {dim}: log10 memory bound = {memory_bound_log10(p.epsilon_b0, gamma, dim):.4f}")
        per = ", ".join(f"{grid_cell_count_log10(e, dim):.4f}" for e in sched.epsilons)
        lines.append(f"dim {dim}: log10 |A(eps_d)| per depth = {per}")
    return "\n".join(lines) + "\n"
