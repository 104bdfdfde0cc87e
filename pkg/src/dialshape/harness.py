"""Experiment orchestration: corpora, RNN training/evaluation, policy learning
curves with and without shaping, and CSV reporting."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .env import DialogueEnv, Episode, load_corpus, run_episode, write_episodes
from .features import feature_dim, write_schema
from .gpsarsa import GpConfig, GpSarsa
from .ontology import Ontology, default_ontology
from .policies import MixedPolicy
from .rnn import RnnModel, TrainConfig, rmse, train
from .shaping import ShapingSource, SmallMDP, oracle_heuristic_potential, shape

log = logging.getLogger(__name__)


# corpora ---------------------------------------------------------------------


class BalanceError(RuntimeError):
    pass


def generate_corpus(ontology: Ontology, n: int, ser=0.15, balanced: bool = True, seed: int = 0,
                    epsilon: float = 0.3, max_tries: Optional[int] = None) -> list[Episode]:
    """Roll out ``n`` dialogues with the mixed handcrafted/random policy.

    ``ser`` is one rate or a sequence of rates used round-robin. With
    ``balanced`` the success and failure classes are filled to ``n // 2`` and
    ``n - n // 2`` by rejection, giving up after ``max_tries`` dialogues.
    """
    sers = list(ser) if isinstance(ser, (list, tuple)) else [ser]
    ss = np.random.SeedSequence(seed)
    env_seed, pol_seed = ss.spawn(2)
    envs = [DialogueEnv(ontology, s, rng=np.random.default_rng(ss_i))
            for s, ss_i in zip(sers, env_seed.spawn(len(sers)))]
    policy = MixedPolicy(epsilon, rng=np.random.default_rng(pol_seed))
    max_tries = max_tries if max_tries is not None else 50 * n
    want = {True: n // 2, False: n - n // 2}
    kept: list[Episode] = []
    counts = {True: 0, False: 0}
    tries = 0
    while len(kept) < n:
        if tries >= max_tries:
            raise BalanceError(
                f"gave up after {tries} dialogues: {counts[True]} successes, "
                f"{counts[False]} failures (ser={ser})")
        env = envs[tries % len(envs)]
        tries += 1
        ep = run_episode(env, policy)
        if balanced and counts[ep.success] >= want[ep.success]:
            continue
        counts[ep.success] += 1
        ep.id = len(kept)
        kept.append(ep)
    return kept


def gen_corpus(path, ontology: Ontology, n: int, ser=0.15, balanced: bool = True,
               seed: int = 0) -> list[Episode]:
    episodes = generate_corpus(ontology, n, ser, balanced, seed)
    write_episodes(episodes, path)
    write_schema(ontology, Path(path).with_suffix(".schema.json"))
    return episodes


# RNN evaluation -------------------------------------------------------------


def mean_baseline_rmse(corpus, mean: float) -> float:
    return float(np.sqrt(np.mean([(R - mean) ** 2 for _, R in corpus])))


def run_rnn_eval(model: RnnModel, corpora: dict, train_mean: Optional[float] = None) -> list[dict]:
    """RMSE of ``model`` and of a constant-mean predictor on each named corpus.

    ``corpora`` maps a name to a corpus path or a loaded list of
    ``(features, R)``; dimension mismatches raise.
    """
    rows = []
    for name, corpus in corpora.items():
        data = load_corpus(corpus, model.input_dim) if isinstance(corpus, (str, Path)) else corpus
        for seq, _ in data:
            if seq.shape[1] != model.input_dim:
                raise ValueError(f"{name}: {seq.shape[1]}-dim features, model expects {model.input_dim}")
        mean = train_mean if train_mean is not None else float(np.mean([R for _, R in data]))
        rows.append({"corpus": name, "n": len(data), "cell": model.cell.value,
                     "rmse": rmse(model, data), "baseline_rmse": mean_baseline_rmse(data, mean)})
    return rows


# policy learning -------------------------------------------------------------


@dataclass
class PolicyConfig:
    budget: int = 1000
    eval_every: int = 50
    eval_n: int = 1000
    ser: float = 0.15
    gamma: float = 1.0
    sigma2: float = 25.0
    nu: float = 0.01
    max_dict: int = 1000
    explore_scale: float = 1.0
    exploration: str = "sample"
    epsilon: float = 0.1


class GreedySnapshot:
    """Frozen greedy policy from the posterior mean (linear kernel)."""

    def __init__(self, gp: GpSarsa):
        self.W = gp.mean_weights()

    def __call__(self, env: DialogueEnv) -> int:
        q = self.W @ env.features
        return int(np.argmax(np.where(env.executable(), q, -np.inf)))


def evaluate(policy, ontology: Ontology, n: int, ser: float, seed) -> tuple[float, float]:
    """Mean environmental reward and success rate over ``n`` dialogues."""
    env = DialogueEnv(ontology, ser, rng=np.random.default_rng(seed))
    rewards, successes = 0.0, 0
    for _ in range(n):
        ep = run_episode(env, policy)
        rewards += ep.return_label
        successes += ep.success
    return rewards / n, successes / n


def _potential_fn(source: ShapingSource, model: Optional[RnnModel]):
    if source is ShapingSource.RNN:
        if model is None:
            raise ValueError("RNN shaping needs a trained model")
        return "rnn"
    return source.value


def train_policy_seed(ontology: Ontology, cfg: PolicyConfig, source, seed: int,
                      model: Optional[RnnModel] = None) -> tuple[list[dict], list[dict]]:
    """One learning run from a fresh posterior.

    Returns one row per evaluation of the frozen greedy policy and one row per
    training dialogue (environmental return plus the summed shaping reward,
    kept apart so composites can be recomputed). Evaluation dialogues do not
    count towards the budget and never touch the posterior.
    """
    source = ShapingSource(source)
    _potential_fn(source, model)
    dim = feature_dim(ontology)
    if model is not None and source is ShapingSource.RNN and model.input_dim != dim:
        raise ValueError(f"model input_dim {model.input_dim} != feature dim {dim}")
    train_ss, eval_ss = np.random.SeedSequence([seed, 1]), np.random.SeedSequence([seed, 2])
    env_ss, explore_ss = train_ss.spawn(2)
    env = DialogueEnv(ontology, cfg.ser, rng=np.random.default_rng(env_ss))
    explore = np.random.default_rng(explore_ss)
    gp = GpSarsa(GpConfig(len(env.actions), dim, cfg.sigma2, cfg.nu, cfg.max_dict, cfg.explore_scale,
                          cfg.exploration, cfg.epsilon))
    eval_seeds = eval_ss.spawn(cfg.budget // cfg.eval_every)
    gamma = cfg.gamma
    rows, online = [], []
    for dialogue in range(1, cfg.budget + 1):
        x = env.reset()
        a = gp.select_action(x, "explore", explore, env.executable())
        phi_prev, shaping_total = 0.0, 0.0
        state = model.initial_state() if source is ShapingSource.RNN else None
        while True:
            _, r, done = env.step(a)
            x_next = env.features
            if source is ShapingSource.RNN:
                state, phi = model.step(state, x_next)
            elif source is ShapingSource.ORACLE:
                phi = oracle_heuristic_potential(env.progress())
            else:
                phi = 0.0
            F = shape(phi_prev, phi, gamma, done) if source is not ShapingSource.NONE else 0.0
            shaping_total += F
            if done:
                gp.observe(x, a, r + F, None, None, True, gamma)
                break
            a_next = gp.select_action(x_next, "explore", explore, env.executable())
            gp.observe(x, a, r + F, x_next, a_next, False, gamma)
            x, a, phi_prev = x_next, a_next, phi
        gp.end_episode()
        online.append({"seed": seed, "dialogue": dialogue, "reward": env.episode.return_label,
                       "shaping": shaping_total, "success": int(env.episode.success)})
        if dialogue % cfg.eval_every == 0:
            k = dialogue // cfg.eval_every - 1
            reward, success = evaluate(GreedySnapshot(gp), ontology, cfg.eval_n, cfg.ser, eval_seeds[k])
            rows.append({"seed": seed, "dialogues": dialogue, "reward": reward, "success": success,
                         "dict_size": gp.m, "clamp_rate": gp.clamps / max(gp.queries, 1)})
            log.info("seed %d %s after %d: reward %.2f success %.3f dict %d",
                     seed, source.value, dialogue, reward, success, gp.m)
    return rows, online


@dataclass
class LearningCurve:
    """Seed-averaged evaluation curve; ``stderr`` is sample stddev / sqrt(n)."""

    source: str
    rows: list = field(default_factory=list)

    @classmethod
    def from_seed_rows(cls, source: str, seed_rows: list[dict]) -> "LearningCurve":
        by_point: dict = {}
        for row in seed_rows:
            by_point.setdefault(row["dialogues"], []).append(row)
        rows = []
        for dialogues in sorted(by_point):
            group = by_point[dialogues]
            rewards = np.array([r["reward"] for r in group])
            n = len(group)
            se = float(np.std(rewards, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            rows.append({"dialogues": dialogues, "mean_reward": float(rewards.mean()),
                         "mean_success": float(np.mean([r["success"] for r in group])),
                         "stderr": se, "n": n})
        return cls(source, rows)


def train_policy(ontology: Ontology, cfg: PolicyConfig, source, seeds: Sequence[int],
                 model: Optional[RnnModel] = None, workers: int = 1):
    """Independent runs for every seed; returns (curve, per-seed rows, online rows).

    ``workers > 1`` fans seeds out over processes; results do not depend on it.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seed list is empty")
    if cfg.eval_every < 1 or cfg.budget < cfg.eval_every:
        raise ValueError("need 1 <= eval_every <= budget")
    source = ShapingSource(source)
    _potential_fn(source, model)
    args = [(ontology, cfg, source, s, model) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_seed_job, args))
    else:
        results = [_seed_job(a) for a in args]
    seed_rows = [r for rows, _ in results for r in rows]
    online = [r for _, rows in results for r in rows]
    return LearningCurve.from_seed_rows(source.value, seed_rows), seed_rows, online


def _seed_job(args):
    return train_policy_seed(*args)


# statistics --------------------------------------------------------------------


def area_under_curve(rows: list[dict], key: str = "reward") -> float:
    """Mean of ``key`` over the evaluation points (rectangle rule, unit width)."""
    if not rows:
        raise ValueError("empty curve")
    return float(np.mean([r[key] for r in rows]))


def per_seed_auc(seed_rows: list[dict]) -> dict:
    by_seed: dict = {}
    for r in seed_rows:
        by_seed.setdefault(r["seed"], []).append(r)
    return {seed: area_under_curve(rows) for seed, rows in sorted(by_seed.items())}


def paired_greater(treated: dict, baseline: dict) -> float:
    """One-sided paired t-test p-value for ``treated > baseline`` over shared seeds."""
    seeds = sorted(set(treated) & set(baseline))
    if len(seeds) < 2:
        return float("nan")
    a = np.array([treated[s] for s in seeds])
    b = np.array([baseline[s] for s in seeds])
    if np.all(a == b):
        return float("nan")
    return float(stats.ttest_rel(a, b, alternative="greater").pvalue)


def moving_average(values: Sequence[float], window: int = 100) -> np.ndarray:
    """Trailing mean over up to ``window`` values (shorter at the start)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(values, dtype=float)
    # direct window means (no running sums) so window=1 is exactly the identity
    return np.array([x[max(0, i + 1 - window):i + 1].mean() for i in range(len(x))])


# CSV i/o --------------------------------------------------------------------------


def write_csv(path, rows: list[dict], fields: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in fields})


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k, v in row.items():
            try:
                row[k] = int(v)
            except ValueError:
                try:
                    row[k] = float(v)
                except ValueError:
                    pass
    return rows


SEED_FIELDS = ("seed", "dialogues", "reward", "success", "dict_size", "clamp_rate")
ONLINE_FIELDS = ("seed", "dialogue", "reward", "shaping", "success")
CURVE_FIELDS = ("source", "dialogues", "mean_reward", "mean_success", "stderr", "n")


def write_policy_run(out_dir, source: str, curve: LearningCurve, seed_rows, online) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"policy_{source}.csv", seed_rows, SEED_FIELDS)
    write_csv(out / f"online_{source}.csv", online, ONLINE_FIELDS)
    write_csv(out / f"curve_{source}.csv", [dict(r, source=source) for r in curve.rows], CURVE_FIELDS)


def report(run_dir, window: int = 100, baseline: str = "none") -> list[dict]:
    """Collect every ``policy_<source>.csv`` in ``run_dir`` and write
    ``learning_curves.csv``, ``smoothed_online.csv`` and ``summary.csv``.

    The summary has per-source AUC statistics and the one-sided paired p-value
    against ``baseline`` (empty when the baseline is missing).
    """
    run = Path(run_dir)
    files = sorted(run.glob("policy_*.csv"))
    if not files:
        raise FileNotFoundError(f"no policy_*.csv runs in {run}")
    curves, smoothed, aucs = [], [], {}
    for f in files:
        source = f.stem[len("policy_"):]
        rows = read_csv(f)
        curve = LearningCurve.from_seed_rows(source, rows)
        curves += [dict(r, source=source) for r in curve.rows]
        aucs[source] = (per_seed_auc(rows), curve)
        online_path = run / f"online_{source}.csv"
        if online_path.exists():
            online = read_csv(online_path)
            by_dialogue: dict = {}
            for r in online:
                by_dialogue.setdefault(r["dialogue"], []).append(r["reward"])
            ds = sorted(by_dialogue)
            mean = [float(np.mean(by_dialogue[d])) for d in ds]
            for d, m, sm in zip(ds, mean, moving_average(mean, window)):
                smoothed.append({"source": source, "dialogue": d, "reward": m, "smoothed": float(sm)})
    write_csv(run / "learning_curves.csv", curves, CURVE_FIELDS)
    write_csv(run / "smoothed_online.csv", smoothed, ("source", "dialogue", "reward", "smoothed"))
    summary = []
    base = aucs.get(baseline, (None, None))[0]
    for source, (seed_auc, curve) in aucs.items():
        vals = np.array(list(seed_auc.values()))
        n = len(vals)
        p = "" if base is None or source == baseline else paired_greater(seed_auc, base)
        summary.append({
            "source": source, "n_seeds": n, "auc_mean": float(vals.mean()),
            "auc_stderr": float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
            "final_reward": curve.rows[-1]["mean_reward"], "final_success": curve.rows[-1]["mean_success"],
            "p_vs_baseline": p,
        })
    write_csv(run / "summary.csv", summary, ("source", "n_seeds", "auc_mean", "auc_stderr", "final_reward",
                                             "final_success", "p_vs_baseline"))
    return summary


# RNN training ------------------------------------------------------------------------


def train_rnn(train_path, valid_path, cfg: TrainConfig, out_dir) -> tuple[RnnModel, Path]:
    """Train on two corpus files; writes ``rnn_<cell>.json`` and ``rnn_<cell>_history.csv``."""
    corpus = load_corpus(train_path)
    if not corpus:
        raise ValueError(f"{train_path} is empty")
    dim = corpus[0][0].shape[1]
    validation = load_corpus(valid_path, dim)
    model, history = train(corpus, validation, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"rnn_{model.cell.value}.json"
    model.save(path)
    write_csv(out / f"rnn_{model.cell.value}_history.csv", history.rows, ("epoch", "train_rmse", "val_rmse", "lr"))
    return model, path


def write_rnn_eval(path, rows: list[dict]) -> None:
    write_csv(path, rows, ("corpus", "n", "cell", "rmse", "baseline_rmse"))


# experiment config ------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    ontology: Optional[str] = None
    n: int = 1000
    ser: list = field(default_factory=lambda: [0.15])
    balanced: bool = True
    seed: int = 0
    cell: str = "gru"
    hidden: int = 100
    lr: float = 0.01
    epochs: int = 100
    clip: Optional[float] = 5.0
    shaping: str = "none"
    gamma: float = 1.0
    seeds: list = field(default_factory=lambda: list(range(10)))
    budget: int = 1000
    eval_every: int = 50
    eval_n: int = 1000
    sigma2: float = 25.0
    nu: float = 0.01
    max_dict: int = 1000
    explore_scale: float = 1.0
    exploration: str = "sample"
    epsilon: float = 0.1
    target_scale: float = 1.0
    model: Optional[str] = None
    train: Optional[str] = None
    valid: Optional[str] = None
    # name -> corpus path for eval-rnn
    test: dict = field(default_factory=dict)
    window: int = 100
    workers: int = 1
    out: str = "runs"

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if isinstance(self.ser, (int, float)):
            self.ser = [float(self.ser)]

    def load_ontology(self) -> Ontology:
        return Ontology.load(self.ontology) if self.ontology else default_ontology()

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(self.budget, self.eval_every, self.eval_n, self.ser[0], self.gamma,
                            self.sigma2, self.nu, self.max_dict, self.explore_scale,
                            self.exploration, self.epsilon)

    def train_config(self) -> TrainConfig:
        return TrainConfig(cell=self.cell, hidden_dim=self.hidden, lr=self.lr, epochs=self.epochs,
                           clip=self.clip, seed=self.seed, target_scale=self.target_scale)

    def updated(self, overrides: dict) -> "ExperimentConfig":
        known = {f for f in self.__dataclass_fields__}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return ExperimentConfig(**{**asdict(self), **overrides})

    @classmethod
    def from_file(cls, path, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        return (base or cls()).updated(json.loads(Path(path).read_text()))



# small-MDP sanity check ------------------------------------------------------


def learn_small_mdp(mdp: SmallMDP, episodes: int = 2000, gamma: float = 0.95, seed: int = 0,
                    sigma2: float = 1.0, max_steps: int = 100, start: Optional[int] = None) -> list[int]:
    """Run GP-SARSA with one-hot state features on ``mdp``; return the greedy
    action of every non-terminal state (-1 for terminal states).

    Exploring starts: each episode begins in a uniformly chosen live state
    (or ``start``) with a uniformly chosen first action, after which actions
    are posterior samples.
    """
    rng = np.random.default_rng(seed)
    S, A = mdp.n_states, mdp.n_actions
    eye = np.eye(S)
    live = np.flatnonzero(~mdp.terminal)
    gp = GpSarsa(GpConfig(A, S, sigma2=sigma2, nu=1e-6, max_dict=S * A))
    for _ in range(episodes):
        s = int(start if start is not None else rng.choice(live))
        a = int(rng.integers(A))
        for step in range(max_steps):
            s2 = int(rng.choice(S, p=mdp.P[s, a]))
            r = float(mdp.R[s, a, s2])
            if mdp.terminal[s2] or step == max_steps - 1:
                gp.observe(eye[s], a, r, None, None, True, gamma)
                break
            a2 = gp.select_action(eye[s2], "sample", rng)
            gp.observe(eye[s], a, r, eye[s2], a2, False, gamma)
            s, a = s2, a2
        gp.end_episode()
    return [-1 if mdp.terminal[s] else gp.select_action(eye[s]) for s in range(S)]
