"""Actor-critic training loop hosting the quantum and classical critics.

The shared trunk is encoder -> LSTM; the actor is a dense head over the LSTM
hidden state. The critic is either a sublayered data-reuploading circuit with
a linear readout (n weights + 1 bias) or a dense baseline stack. Gradients
are computed once per episode by replaying the recorded trajectory, which
keeps the episode loss a pure function of the parameters and lets the quantum
gradient route (adjoint backprop vs parameter-shift) be swapped freely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import encoding, env, nn, qsim
from .encoding import CircuitLayout
from .qsim import NoiseSpec


class UsageError(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    critic: str = "quantum"  # "quantum" | "classical"
    n_qubits: int = 4
    n_layers: int = 2
    gradient_mode: str = "backprop"  # "backprop" | "param-shift"
    noise: Optional[NoiseSpec] = None
    gamma: float = 0.99
    entropy_weight: float = 0.01
    entropy_bonus: bool = True  # False flips to the literal negative-entropy term
    lr: float = 0.0005
    episodes: int = 100
    max_steps: int = 500
    seed: int = 0
    lstm_hidden: int = 32
    encoder_hidden: int = 64
    encoder_out: int = 28
    max_grad_norm: Optional[float] = None

    def __post_init__(self):
        if self.critic not in ("quantum", "classical"):
            raise UsageError(f"unknown critic kind {self.critic!r}")
        if self.gradient_mode not in ("backprop", "param-shift"):
            raise UsageError(f"unknown gradient mode {self.gradient_mode!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise UsageError("gamma must be in [0, 1]")
        if self.entropy_weight < 0:
            raise UsageError("entropy weight must be >= 0")
        if (self.noise is not None and self.noise.depolarizing is not None
                and self.gradient_mode == "backprop"):
            raise UsageError("depolarizing noise requires the parameter-shift gradient mode")


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Named substreams so enabling one consumer never shifts another."""
    root = np.random.SeedSequence(seed)
    names = ("init", "env", "policy", "noise")
    children = root.spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


# ---------------------------------------------------------------------------
# critics


class QuantumCritic:
    """Data-reuploading circuit critic with a linear n-weights + bias readout."""

    def __init__(self, layout: CircuitLayout, rng: np.random.Generator):
        self.layout = layout
        self.gates, self.sublayer_marks = encoding.build_circuit(layout)
        self.params = {
            "theta": rng.uniform(-np.pi, np.pi, size=layout.param_count),
            "w": nn.glorot_uniform(rng, layout.n, 1, (layout.n,)),
            "b": np.zeros(1),
        }

    @property
    def param_count(self) -> int:
        return self.layout.param_count + self.layout.n + 1

    def value(self, h: np.ndarray, noise: Optional[NoiseSpec] = None,
              rng: Optional[np.random.Generator] = None) -> float:
        x = encoding.pad_input(h, self.layout)
        return qsim.circuit_value(
            self.gates, x, self.params["theta"], self.params["w"],
            float(self.params["b"][0]), self.layout.n,
            noise=noise, rng=rng, sublayer_marks=self.sublayer_marks,
        )

    def value_and_grads(self, h: np.ndarray, mode: str = "backprop",
                        noise: Optional[NoiseSpec] = None,
                        rng: Optional[np.random.Generator] = None):
        """Returns (value, grads dict, dV/dh). Grads are of V itself; callers
        scale by the upstream dLoss/dV."""
        x = encoding.pad_input(h, self.layout)
        theta = self.params["theta"]
        w = self.params["w"]
        b = float(self.params["b"][0])
        n = self.layout.n
        if mode == "backprop":
            value, d_theta, d_x, z, _ = qsim.adjoint_value_and_grad(
                self.gates, x, theta, w, b, n)
        elif mode == "param-shift":
            z = qsim.run_circuit(self.gates, x, theta, n, noise, rng, self.sublayer_marks)
            value = float(b + np.dot(w, z))
            d_theta = qsim.param_shift_gradient(
                self.gates, x, theta, w, b, n, noise, rng, self.sublayer_marks, wrt="param")
            d_x = qsim.param_shift_gradient(
                self.gates, x, theta, w, b, n, noise, rng, self.sublayer_marks, wrt="data")
        else:
            raise UsageError(f"unknown gradient mode {mode!r}")
        grads = {"theta": d_theta, "w": z, "b": np.ones(1)}
        return value, grads, d_x[: self.layout.p]


class ClassicalCritic:
    """Dense(32 -> 64) + LayerNorm + Dense(64 -> 1); 2305 parameters at the
    default hidden size."""

    def __init__(self, in_dim: int, rng: np.random.Generator, hidden: int = 64):
        self.in_dim = in_dim
        self.hidden = hidden
        self.params = {}
        for name, sub in (
            ("d1", nn.dense_init(rng, in_dim, hidden)),
            ("ln", nn.layer_norm_init(hidden)),
            ("d2", nn.dense_init(rng, hidden, 1)),
        ):
            for key, val in sub.items():
                self.params[f"{name}.{key}"] = val

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def _sub(self, prefix: str) -> dict:
        return {k.split(".", 1)[1]: v for k, v in self.params.items() if k.startswith(prefix + ".")}

    def forward(self, h: np.ndarray):
        d1, ln, d2 = self._sub("d1"), self._sub("ln"), self._sub("d2")
        z1, c1 = nn.dense_forward(d1, h)
        z2, c2 = nn.layer_norm_forward(ln, z1)
        v, c3 = nn.dense_forward(d2, z2)
        return float(v[0]), (c1, c2, c3)

    def value(self, h: np.ndarray, noise=None, rng=None) -> float:
        return self.forward(h)[0]

    def value_and_grads(self, h: np.ndarray, mode: str = "backprop",
                        noise=None, rng=None):
        value, (c1, c2, c3) = self.forward(h)
        d1, ln, d2 = self._sub("d1"), self._sub("ln"), self._sub("d2")
        dz2, g3 = nn.dense_backward(d2, np.ones(1), c3)
        dz1, g2 = nn.layer_norm_backward(ln, dz2, c2)
        dh, g1 = nn.dense_backward(d1, dz1, c1)
        grads = {f"d1.{k}": v for k, v in g1.items()}
        grads.update({f"ln.{k}": v for k, v in g2.items()})
        grads.update({f"d2.{k}": v for k, v in g3.items()})
        return value, grads, dh


# ---------------------------------------------------------------------------
# actor-critic model


class ActorCriticModel:
    """Encoder + LSTM trunk, dense actor head, pluggable critic."""

    def __init__(self, config: AgentConfig, obs_dim: int, rng: np.random.Generator):
        self.config = config
        self.obs_dim = obs_dim
        enc_out = config.encoder_out
        self.lstm_in = enc_out + 4  # + reward, 2-dim velocity, previous speed action
        self.params: dict[str, np.ndarray] = {}
        self._add("enc1", nn.dense_init(rng, obs_dim, config.encoder_hidden))
        self._add("enc2", nn.dense_init(rng, config.encoder_hidden, enc_out))
        self._add("lstm", nn.lstm_init(rng, self.lstm_in, config.lstm_hidden))
        self._add("actor", nn.dense_init(rng, config.lstm_hidden, env.N_ACTIONS))
        if config.critic == "quantum":
            layout = encoding.plan_layout(config.lstm_hidden, config.n_qubits, config.n_layers)
            self.critic = QuantumCritic(layout, rng)
        else:
            self.critic = ClassicalCritic(config.lstm_hidden, rng)
        for key, val in self.critic.params.items():
            self.params[f"critic.{key}"] = val
        self.critic.params = self._sub("critic")  # share storage

    def _add(self, prefix: str, sub: dict):
        for key, val in sub.items():
            self.params[f"{prefix}.{key}"] = val

    def _sub(self, prefix: str) -> dict:
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in self.params.items() if k.startswith(prefix + ".")}

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    @property
    def critic_param_count(self) -> int:
        return self.critic.param_count

    def trunk_forward(self, obs_vec: np.ndarray, extras: np.ndarray,
                      h: np.ndarray, c: np.ndarray):
        enc1, enc2 = self._sub("enc1"), self._sub("enc2")
        z1, c1 = nn.dense_forward(enc1, obs_vec)
        a1, t1 = nn.tanh_forward(z1)
        z2, c2 = nn.dense_forward(enc2, a1)
        a2, t2 = nn.tanh_forward(z2)
        x = np.concatenate([a2, extras])
        h_new, c_new, cl = nn.lstm_step(self._sub("lstm"), x, h, c)
        logits, ca = nn.dense_forward(self._sub("actor"), h_new)
        cache = (c1, t1, c2, t2, cl, ca)
        return h_new, c_new, logits, cache

    def trunk_backward(self, dlogits: np.ndarray, dh_extra: np.ndarray,
                       dh_next: np.ndarray, dc_next: np.ndarray, cache, grads: dict):
        """Backward through actor head, LSTM step and encoder for one step.

        dh_extra carries the critic's pull on the hidden state; dh_next/dc_next
        come from the future timestep. Returns (dh_prev, dc_prev)."""
        c1, t1, c2, t2, cl, ca = cache
        dh_actor, g_actor = nn.dense_backward(self._sub("actor"), dlogits, ca)
        nn.accumulate(grads, {f"actor.{k}": v for k, v in g_actor.items()})
        dh = dh_actor + dh_extra + dh_next
        dx, dh_prev, dc_prev, g_lstm = nn.lstm_step_backward(self._sub("lstm"), dh, dc_next, cl)
        nn.accumulate(grads, {f"lstm.{k}": v for k, v in g_lstm.items()})
        enc_out = self.config.encoder_out
        da2 = dx[:enc_out]
        dz2 = nn.tanh_backward(da2, t2)
        da1, g2 = nn.dense_backward(self._sub("enc2"), dz2, c2)
        nn.accumulate(grads, {f"enc2.{k}": v for k, v in g2.items()})
        dz1 = nn.tanh_backward(da1, t1)
        _, g1 = nn.dense_backward(self._sub("enc1"), dz1, c1)
        nn.accumulate(grads, {f"enc1.{k}": v for k, v in g1.items()})
        return dh_prev, dc_prev

    def select_action(self, h: np.ndarray, rng: Optional[np.random.Generator] = None,
                      greedy: bool = False):
        """Sample (or argmax) a speed action from the actor head on h."""
        logits, _ = nn.dense_forward(self._sub("actor"), h)
        probs, entropy = nn.softmax_entropy(logits)
        if greedy:
            action = int(np.argmax(probs))
        else:
            action = int(rng.choice(env.N_ACTIONS, p=probs))
        return action, float(np.log(probs[action])), entropy


# ---------------------------------------------------------------------------
# episode rollout and replay


@dataclass
class EpisodeTrace:
    """Recorded per-step data; observations never include hidden ped goals."""

    obs: list = field(default_factory=list)  # np vectors
    extras: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    logps: list = field(default_factory=list)
    entropies: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)  # totals
    breakdowns: list = field(default_factory=list)
    outcome: Optional[str] = None
    bootstrap: float = 0.0
    steps: int = 0
    near_miss: bool = False

    @property
    def episode_return(self) -> float:
        return float(sum(self.rewards))


def _extras_vector(obs: env.Observation) -> np.ndarray:
    """LSTM side channel: reward, 2-dim velocity, previous speed action."""
    vx = obs.speed  # car frame: velocity is (v, 0)
    acc_scalar = float(np.argmax(obs.prev_accel)) - 1.0
    return np.array([obs.prev_reward / 10.0, vx / 15.0, 0.0, acc_scalar])


def run_episode(model: ActorCriticModel, scene: env.Scene,
                env_config: env.EnvConfig,
                policy_rng: Optional[np.random.Generator] = None,
                noise_rng: Optional[np.random.Generator] = None,
                greedy: bool = False,
                collect_near_miss: bool = False) -> EpisodeTrace:
    config = model.config
    noise = config.noise if noise_rng is not None else None
    world, obs = env.reset(scene, config=env_config)
    h = np.zeros(config.lstm_hidden)
    c = np.zeros(config.lstm_hidden)
    trace = EpisodeTrace()
    near_miss_seen = False
    while not world.done and trace.steps < config.max_steps:
        obs_vec = obs.to_vector()
        extras = _extras_vector(obs)
        h, c, logits, _ = model.trunk_forward(obs_vec, extras, h, c)
        probs, entropy = nn.softmax_entropy(logits)
        if greedy:
            action = int(np.argmax(probs))
        else:
            action = int(policy_rng.choice(env.N_ACTIONS, p=probs))
        value = model.critic.value(h, noise=noise, rng=noise_rng)
        world, obs, reward, done, info = env.step(world, action)
        if env.NEAR_MISS in info["proximity"]:
            near_miss_seen = True
        trace.obs.append(obs_vec)
        trace.extras.append(extras)
        trace.actions.append(action)
        trace.logps.append(float(np.log(probs[action])))
        trace.entropies.append(entropy)
        trace.values.append(value)
        trace.rewards.append(reward.total)
        trace.breakdowns.append(reward)
        trace.steps += 1
    trace.outcome = world.outcome
    if trace.outcome == "timeout":
        # truncated: bootstrap the return from the value of the final state
        obs_vec = obs.to_vector()
        extras = _extras_vector(obs)
        h, c, _, _ = model.trunk_forward(obs_vec, extras, h, c)
        trace.bootstrap = model.critic.value(h, noise=noise, rng=noise_rng)
    trace.near_miss = near_miss_seen
    return trace


def discounted_returns(rewards, gamma: float, bootstrap: float = 0.0) -> list[float]:
    """G_t = r_t + gamma * G_{t+1}, seeded with the bootstrap value."""
    if not 0.0 <= gamma <= 1.0:
        raise UsageError("gamma must be in [0, 1]")
    out = []
    g = bootstrap
    for r in reversed(rewards):
        g = r + gamma * g
        out.append(g)
    out.reverse()
    return out


def losses(values, returns, logps, entropies, entropy_weight: float,
           entropy_bonus: bool = True) -> tuple[float, float]:
    """(J_V, J_pi): mean squared value error and the policy objective
    (advantage-weighted log-prob plus the entropy term, to be ascended)."""
    if not (len(values) == len(returns) == len(logps) == len(entropies)):
        raise UsageError("mismatched series lengths")
    t = len(values)
    j_v = sum((g - v) ** 2 for g, v in zip(returns, values)) / t
    sign = 1.0 if entropy_bonus else -1.0
    j_pi = sum(
        lp * (g - v) + entropy_weight * sign * ent
        for lp, g, v, ent in zip(logps, returns, values, entropies)
    ) / t
    return float(j_v), float(j_pi)


def replay_loss(model: ActorCriticModel, trace: EpisodeTrace, returns,
                advantages=None) -> float:
    """Episode loss J_V - J_pi as a pure function of the current parameters,
    replaying the recorded observations and actions (returns stay frozen).

    By default the advantages in the policy term are recomputed from the
    replayed values. Passing ``advantages`` freezes them instead, which makes
    finite differences of this loss match the detached-advantage gradient
    computed by :func:`episode_gradients`.
    """
    config = model.config
    h = np.zeros(config.lstm_hidden)
    c = np.zeros(config.lstm_hidden)
    values, logps, entropies = [], [], []
    for obs_vec, extras, action in zip(trace.obs, trace.extras, trace.actions):
        h, c, logits, _ = model.trunk_forward(obs_vec, extras, h, c)
        probs, entropy = nn.softmax_entropy(logits)
        logps.append(float(np.log(probs[action])))
        entropies.append(entropy)
        values.append(model.critic.value(h))
    j_v, j_pi = losses(values, returns, logps, entropies,
                       config.entropy_weight, config.entropy_bonus)
    if advantages is not None:
        t = len(values)
        sign = 1.0 if config.entropy_bonus else -1.0
        j_pi = float(sum(
            lp * a + config.entropy_weight * sign * ent
            for lp, a, ent in zip(logps, advantages, entropies)
        ) / t)
    return j_v - j_pi


def episode_gradients(model: ActorCriticModel, trace: EpisodeTrace, returns,
                      gradient_mode: Optional[str] = None,
                      noise_rng: Optional[np.random.Generator] = None,
                      detach_advantage: bool = True):
    """Gradient of the combined loss J_V - J_pi over one recorded episode.

    The advantage in the policy term is treated as a constant, so no policy
    gradient flows into the critic parameters. Returns (grads, j_v, j_pi).
    """
    config = model.config
    mode = gradient_mode or config.gradient_mode
    t_len = trace.steps
    if t_len == 0:
        raise UsageError("empty episode")
    h = np.zeros(config.lstm_hidden)
    c = np.zeros(config.lstm_hidden)
    caches, probs_seq, values, logps, entropies = [], [], [], [], []
    critic_pulls = []  # (grads-of-V, dV/dh) per step
    for obs_vec, extras, action in zip(trace.obs, trace.extras, trace.actions):
        h, c, logits, cache = model.trunk_forward(obs_vec, extras, h, c)
        probs, entropy = nn.softmax_entropy(logits)
        value, vgrads, dvdh = model.critic.value_and_grads(
            h, mode=mode, noise=config.noise, rng=noise_rng)
        caches.append(cache)
        probs_seq.append(probs)
        values.append(value)
        logps.append(float(np.log(probs[action])))
        entropies.append(entropy)
        critic_pulls.append((vgrads, dvdh))

    j_v, j_pi = losses(values, returns, logps, entropies,
                       config.entropy_weight, config.entropy_bonus)

    grads: dict[str, np.ndarray] = {}
    dh_next = np.zeros(config.lstm_hidden)
    dc_next = np.zeros(config.lstm_hidden)
    ent_sign = 1.0 if config.entropy_bonus else -1.0
    for t in range(t_len - 1, -1, -1):
        advantage = returns[t] - values[t]
        probs = probs_seq[t]
        onehot = np.zeros(env.N_ACTIONS)
        onehot[trace.actions[t]] = 1.0
        # d(J_V)/dV and d(-J_pi)/dV; the advantage path is detached
        dv = 2.0 * (values[t] - returns[t]) / t_len
        if not detach_advantage:
            dv += logps[t] / t_len
        dlogits = -(advantage * (onehot - probs)) / t_len
        dlogits += nn.entropy_backward(probs, -config.entropy_weight * ent_sign / t_len)

        vgrads, dvdh = critic_pulls[t]
        nn.accumulate(grads, {f"critic.{k}": dv * g for k, g in vgrads.items()})
        dh_next, dc_next = model.trunk_backward(
            dlogits, dv * dvdh, dh_next, dc_next, caches[t], grads)
    if config.max_grad_norm is not None:
        grads = nn.clip_by_global_norm(grads, config.max_grad_norm)
    return grads, j_v, j_pi


# ---------------------------------------------------------------------------
# training runs


@dataclass
class RunRecord:
    """Per-episode series for one seeded training run."""

    seed: int
    critic: str
    returns: list = field(default_factory=list)
    entropies: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    outcomes: list = field(default_factory=list)
    value_losses: list = field(default_factory=list)
    critic_params: int = 0
    total_params: int = 0

    def to_rows(self, smooth_window: int = 100) -> list[dict]:
        from . import analysis

        smoothed = analysis.smooth_curve(self.returns, smooth_window)
        return [
            {
                "episode": i,
                "return": self.returns[i],
                "smoothed_return": smoothed[i],
                "entropy": self.entropies[i],
                "steps": self.steps[i],
                "outcome": self.outcomes[i],
            }
            for i in range(len(self.returns))
        ]


def train_run(config: AgentConfig, scenes: list[env.Scene],
              env_config: env.EnvConfig = env.EnvConfig(),
              model: Optional[ActorCriticModel] = None) -> tuple[RunRecord, ActorCriticModel]:
    """Train for config.episodes episodes, one optimizer step per episode."""
    if not scenes:
        raise UsageError("no scenes to train on")
    streams = rng_streams(config.seed)
    if model is None:
        model = ActorCriticModel(config, env.observation_dim(env_config), streams["init"])
    optimizer = nn.Adam(lr=config.lr)
    record = RunRecord(
        seed=config.seed,
        critic=config.critic,
        critic_params=model.critic_param_count,
        total_params=model.param_count,
    )
    for _ in range(config.episodes):
        scene = scenes[int(streams["env"].integers(len(scenes)))]
        trace = run_episode(model, scene, env_config,
                            policy_rng=streams["policy"], noise_rng=streams["noise"])
        returns = discounted_returns(trace.rewards, config.gamma, trace.bootstrap)
        grads, j_v, _ = episode_gradients(model, trace, returns, noise_rng=streams["noise"])
        optimizer.update(model.params, grads)
        record.returns.append(trace.episode_return)
        record.entropies.append(float(np.mean(trace.entropies)))
        record.steps.append(trace.steps)
        record.outcomes.append(trace.outcome)
        record.value_losses.append(j_v)
    return record, model


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class PolicyMetrics:
    time_to_goal: Optional[float]  # s, mean over goal-reaching episodes
    crash_rate: float  # % of episodes
    near_miss_rate: float  # % of episodes
    safety_index: int  # scenarios with crash% < 20 and near-miss% < 20
    mean_return: float
    n_scenarios: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_policy(model: ActorCriticModel, scenes: list[env.Scene],
                    env_config: env.EnvConfig = env.EnvConfig()) -> tuple[PolicyMetrics, list[dict]]:
    """Greedy rollouts over all scenes; per-scene outcomes plus aggregates."""
    per_scene = []
    for idx, scene in enumerate(scenes):
        trace = run_episode(model, scene, env_config, greedy=True, collect_near_miss=True)
        per_scene.append({
            "scene": idx,
            "scenario": scene.scenario_id,
            "ped_speed": scene.ped_speed,
            "ped_distance": scene.ped_distance,
            "outcome": trace.outcome,
            "steps": trace.steps,
            "return": trace.episode_return,
            "near_miss": trace.near_miss,
            "time_to_goal": trace.steps * env_config.dt if trace.outcome == "goal" else None,
        })
    crashes = [row["outcome"] == "collision" for row in per_scene]
    near = [row["near_miss"] for row in per_scene]
    ttgs = [row["time_to_goal"] for row in per_scene if row["time_to_goal"] is not None]
    by_scenario: dict[int, list[dict]] = {}
    for row in per_scene:
        by_scenario.setdefault(row["scenario"], []).append(row)
    si = 0
    for rows in by_scenario.values():
        c = 100.0 * sum(r["outcome"] == "collision" for r in rows) / len(rows)
        m = 100.0 * sum(r["near_miss"] for r in rows) / len(rows)
        if c < 20.0 and m < 20.0:
            si += 1
    metrics = PolicyMetrics(
        time_to_goal=float(np.mean(ttgs)) if ttgs else None,
        crash_rate=100.0 * sum(crashes) / len(per_scene),
        near_miss_rate=100.0 * sum(near) / len(per_scene),
        safety_index=si,
        mean_return=float(np.mean([row["return"] for row in per_scene])),
        n_scenarios=len(by_scenario),
    )
    return metrics, per_scene


def random_policy_mean_return(scenes: list[env.Scene], rng: np.random.Generator,
                              env_config: env.EnvConfig = env.EnvConfig(),
                              max_steps: int = 500) -> float:
    """Mean return of uniformly random speed actions over the given scenes."""
    totals = []
    for scene in scenes:
        world, _ = env.reset(scene, config=env_config)
        total = 0.0
        while not world.done and world.t < max_steps:
            world, _, reward, _, _ = env.step(world, int(rng.integers(env.N_ACTIONS)))
            total += reward.total
        totals.append(total)
    return float(np.mean(totals))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: ActorCriticModel, path: str, extra: Optional[dict] = None) -> None:
    """Flat named parameter list with shapes; JSON round-trips exactly."""
    noise = model.config.noise
    payload = {
        "config": {
            **{k: v for k, v in asdict(model.config).items() if k != "noise"},
            "noise": None if noise is None else asdict(noise),
        },
        "obs_dim": model.obs_dim,
        "params": {
            name: {"shape": list(p.shape), "data": p.reshape(-1).tolist()}
            for name, p in model.params.items()
        },
    }
    if extra:
        payload["meta"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str) -> ActorCriticModel:
    with open(path) as fh:
        payload = json.load(fh)
    cfg_dict = dict(payload["config"])
    if cfg_dict.get("noise") is not None:
        cfg_dict["noise"] = NoiseSpec(**cfg_dict["noise"])
    config = AgentConfig(**cfg_dict)
    model = ActorCriticModel(config, payload["obs_dim"], np.random.default_rng(0))
    for name, entry in payload["params"].items():
        arr = np.array(entry["data"], dtype=float).reshape(entry["shape"])
        if name not in model.params:
            raise UsageError(f"checkpoint parameter {name!r} unknown to this architecture")
        if model.params[name].shape != arr.shape:
            raise UsageError(f"checkpoint shape mismatch for {name!r}")
        model.params[name][...] = arr
    return model


# ---------------------------------------------------------------------------
# critic parameter-vector plumbing (capacity analysis)


def critic_param_order(critic) -> list[str]:
    return list(critic.params.keys())


def get_critic_param_vector(critic) -> np.ndarray:
    return np.concatenate([critic.params[k].reshape(-1) for k in critic_param_order(critic)])


def set_critic_param_vector(critic, vec: np.ndarray) -> None:
    pos = 0
    for key in critic_param_order(critic):
        p = critic.params[key]
        p[...] = vec[pos : pos + p.size].reshape(p.shape)
        pos += p.size
    if pos != vec.size:
        raise UsageError("parameter vector length mismatch")


def critic_grad_vector(critic, h: np.ndarray, mode: str = "backprop") -> np.ndarray:
    """Gradient of the critic value w.r.t. all its parameters, flattened in
    the canonical parameter order."""
    _, grads, _ = critic.value_and_grads(h, mode=mode)
    return np.concatenate([np.asarray(grads[k]).reshape(-1) for k in critic_param_order(critic)])


def sample_critic_param_vector(critic, rng: np.random.Generator) -> np.ndarray:
    """Parameter-cube sample: U(-pi, pi) for circuit angles, U(-1, 1) for
    classical weights (incl. the quantum critic's readout head)."""
    parts = []
    for key in critic_param_order(critic):
        size = critic.params[key].size
        if key == "theta":
            parts.append(rng.uniform(-np.pi, np.pi, size=size))
        else:
            parts.append(rng.uniform(-1.0, 1.0, size=size))
    return np.concatenate(parts)
