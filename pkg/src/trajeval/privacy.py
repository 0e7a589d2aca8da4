"""Membership inference against blurring models, plus the dual-solver
trajectory-user-linking protocol.

The attack scores a target record by its minimum distance to the released
dataset and compares it against a threshold learned on auxiliary data: the
midpoint between the mean member and mean non-member score.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Dataset, SplitSpec, Trajectory, mask_size_preimage, mask_trajectory, split_dataset
from .measures import cosine_distance, discrete_frechet

METRIC_KINDS = ("frechet", "custom")
SCENARIOS = ("main", "masked", "released_only")


@dataclass
class AuxSplit:
    d_aux_train: Dataset
    q_aux: Dataset
    q_tau: Dataset

    def __post_init__(self) -> None:
        if not (len(self.d_aux_train) and len(self.q_aux) and len(self.q_tau)):
            raise ValueError("all three auxiliary parts must be non-empty")


@dataclass
class ThresholdModel:
    tau: float
    metric: str
    member_mean: float
    non_member_mean: float
    degenerate: bool = False


@dataclass
class AttackConfig:
    scenario: str = "main"
    metric: str = "frechet"
    keep_fraction: float | None = None
    aux_fractions: tuple[float, float, float] = (0.5, 0.25, 0.25)
    n_targets: int = 200
    n_seeds: int = 4
    seed: int = 0
    length_filter: bool = True
    category_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choices: {SCENARIOS}")
        if self.metric not in METRIC_KINDS:
            raise ValueError(f"unknown metric {self.metric!r}; choices: {METRIC_KINDS}")
        if self.scenario == "masked":
            if self.keep_fraction is None:
                raise ValueError("masked scenario requires keep_fraction")
            if not 0.0 < self.keep_fraction <= 1.0:
                raise ValueError("keep_fraction must be in (0, 1]")


@dataclass
class TargetOutcome:
    seed: int
    target_id: str
    truth: str      # IN | OUT
    alpha: float
    decision: str   # IN | OUT

    @property
    def correct(self) -> bool:
        return self.truth == self.decision


@dataclass
class AttackResult:
    scenario: str
    metric: str
    outcomes: list[TargetOutcome]
    thresholds: list[ThresholdModel]
    per_seed_accuracy: list[float]

    @property
    def accuracy(self) -> float:
        return float(np.mean([o.correct for o in self.outcomes]))

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.per_seed_accuracy))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.per_seed_accuracy))

    def summary(self) -> str:
        return f"{self.mean_accuracy:.3f} ± {self.std_accuracy:.3f}"


@dataclass
class TULResult:
    protocol: str  # legacy | fixed
    accuracy_real: float
    accuracy_syn: float

    @property
    def gap_pp(self) -> float:
        return (self.accuracy_real - self.accuracy_syn) * 100.0


# ---------------------------------------------------------------------------
# distances and scores
# ---------------------------------------------------------------------------

def _category_counts(t: Trajectory) -> Counter:
    return Counter(c for c in t.categories if c is not None)


def custom_distance(a: Trajectory, b: Trajectory, category_weight: float = 1.0) -> float:
    """Coordinate Frechet distance plus weighted cosine dissimilarity of the
    semantic feature frequencies; smaller means closer on every component."""
    d = discrete_frechet(a.xy, b.xy)
    ca, cb = _category_counts(a), _category_counts(b)
    if not ca or not cb:
        raise ValueError("custom distance requires category annotations on both trajectories")
    vocab = sorted(set(ca) | set(cb))
    va = np.array([ca.get(k, 0) for k in vocab], dtype=float)
    vb = np.array([cb.get(k, 0) for k in vocab], dtype=float)
    return d + category_weight * cosine_distance(va, vb)


def trajectory_distance(kind: str, category_weight: float = 1.0) -> Callable[[Trajectory, Trajectory], float]:
    if kind == "frechet":
        return lambda a, b: discrete_frechet(a.xy, b.xy)
    if kind == "custom":
        return lambda a, b: custom_distance(a, b, category_weight)
    raise ValueError(f"unknown metric kind {kind!r}")


def _candidate_lengths(
    query_len: int, released_lengths: set[int], keep_fraction: float | None
) -> set[int]:
    """Lengths in the released set compatible with the query.

    For masked queries the compatible set is the preimage of the mask-size
    rule: original lengths whose masked size equals the query length.
    """
    if keep_fraction is None or keep_fraction >= 1.0:
        return {query_len}
    return mask_size_preimage(query_len, keep_fraction, max(released_lengths, default=0))


def compute_alpha(
    x_t: Trajectory,
    released: Dataset,
    metric: str = "frechet",
    length_filter: bool = True,
    keep_fraction: float | None = None,
    category_weight: float = 1.0,
) -> float:
    """Minimum distance from the target to the released records.

    With length filtering, candidates matching the (mask-compatible) visit
    count are preferred; an empty candidate set widens to lengths within 1,
    then 2, then falls back to every released record.
    """
    if len(released) == 0:
        raise ValueError("released dataset is empty")
    dist = trajectory_distance(metric, category_weight)
    by_length: dict[int, list[Trajectory]] = {}
    for t in released:
        by_length.setdefault(len(t), []).append(t)

    if length_filter:
        wanted = _candidate_lengths(len(x_t), set(by_length), keep_fraction)
        candidates: list[Trajectory] = []
        for widen in (0, 1, 2):
            lengths = {w + d for w in wanted for d in range(-widen, widen + 1)}
            candidates = [t for L in sorted(lengths) for t in by_length.get(L, [])]
            if candidates:
                break
        if not candidates:
            candidates = list(released)
    else:
        candidates = list(released)
    return min(dist(x_t, y) for y in candidates)


def split_aux(d_aux: Dataset, fractions: Sequence[float], seed: int) -> AuxSplit:
    """Trajectory-level three-way partition of the auxiliary dataset."""
    if len(fractions) != 3:
        raise ValueError("auxiliary split needs exactly three fractions")
    parts = split_dataset(d_aux, SplitSpec(tuple(fractions)), seed)
    return AuxSplit(*parts)


def learn_threshold(
    split: AuxSplit,
    model_factory: Callable[[int], object],
    metric: str = "frechet",
    seed: int = 0,
    keep_fraction: float | None = None,
    length_filter: bool = True,
    category_weight: float = 1.0,
) -> ThresholdModel:
    """Fit a shadow model, blur the auxiliary queries and take the midpoint
    between the mean member and mean non-member minimum-distance scores.

    Under masking, auxiliary queries are masked exactly like the targets so
    the threshold transfers.
    """
    shadow = model_factory(seed)
    shadow.fit(split.d_aux_train)
    s_aux = shadow.blur(split.q_aux)

    def scores(part: Dataset, offset: int) -> list[float]:
        out = []
        for i, x in enumerate(part):
            q = x
            if keep_fraction is not None and keep_fraction < 1.0:
                q = mask_trajectory(x, keep_fraction, seed=hash((seed, offset, i)) % (2 ** 32))
            out.append(compute_alpha(
                q, s_aux, metric,
                length_filter=length_filter,
                keep_fraction=keep_fraction,
                category_weight=category_weight,
            ))
        return out

    member_scores = scores(split.q_aux, 0)
    non_member_scores = scores(split.q_tau, 1)
    m_in = float(np.mean(member_scores))
    m_out = float(np.mean(non_member_scores))
    degenerate = math.isclose(m_in, m_out, rel_tol=0.0, abs_tol=1e-12)
    return ThresholdModel(
        tau=(m_in + m_out) / 2.0,
        metric=metric,
        member_mean=m_in,
        non_member_mean=m_out,
        degenerate=degenerate,
    )


def decide(alpha: float, tm: ThresholdModel) -> str:
    """IN iff the score does not exceed the threshold (boundary counts as IN)."""
    return "IN" if alpha <= tm.tau else "OUT"


# ---------------------------------------------------------------------------
# full attack
# ---------------------------------------------------------------------------

def run_attack(
    d_train: Dataset,
    q_target: Dataset,
    holdout: Dataset,
    model_factory: Callable[[int], object],
    cfg: AttackConfig,
    d_aux: Dataset | None = None,
) -> AttackResult:
    """Run the threshold attack over the configured number of seeds.

    Members come from the blurring model's inference set, non-members from a
    held-out partition disjoint from training, inference and auxiliary data;
    targets are balanced. The released-only scenario must not receive any
    auxiliary dataset — it derives everything from the released records.
    """
    if cfg.scenario in ("main", "masked"):
        if d_aux is None:
            raise ValueError(f"scenario {cfg.scenario!r} requires an auxiliary dataset")
    elif d_aux is not None:
        raise ValueError("released_only scenario must not receive an auxiliary dataset")

    keep = cfg.keep_fraction if cfg.scenario == "masked" else None
    per_side = cfg.n_targets // 2
    if per_side < 1:
        raise ValueError("n_targets must be at least 2")
    if len(q_target) < per_side or len(holdout) < per_side:
        raise ValueError(
            f"insufficient targets: need {per_side} members and non-members, "
            f"have {len(q_target)} and {len(holdout)}"
        )

    outcomes: list[TargetOutcome] = []
    thresholds: list[ThresholdModel] = []
    per_seed_acc: list[float] = []

    for s in range(cfg.n_seeds):
        seed = cfg.seed + s
        target_model = model_factory(seed)
        target_model.fit(d_train)
        s_target = target_model.blur(q_target)

        aux_source = d_aux if cfg.scenario in ("main", "masked") else s_target
        split = split_aux(aux_source, cfg.aux_fractions, seed)
        tm = learn_threshold(
            split, model_factory, cfg.metric, seed=seed + 10_000,
            keep_fraction=keep, length_filter=cfg.length_filter,
            category_weight=cfg.category_weight,
        )
        thresholds.append(tm)

        rng = np.random.default_rng([cfg.seed, s])
        member_idx = rng.choice(len(q_target), size=per_side, replace=False)
        non_member_idx = rng.choice(len(holdout), size=per_side, replace=False)
        targets = [(q_target.trajectories[i], "IN") for i in member_idx]
        targets += [(holdout.trajectories[i], "OUT") for i in non_member_idx]

        correct = 0
        for k, (x, truth) in enumerate(targets):
            q = x
            if keep is not None and keep < 1.0:
                q = mask_trajectory(x, keep, seed=hash((seed, 2, k)) % (2 ** 32))
            alpha = compute_alpha(
                q, s_target, cfg.metric,
                length_filter=cfg.length_filter,
                keep_fraction=keep,
                category_weight=cfg.category_weight,
            )
            decision = decide(alpha, tm)
            outcomes.append(TargetOutcome(seed, x.traj_id, truth, alpha, decision))
            correct += decision == truth
        per_seed_acc.append(correct / len(targets))

    return AttackResult(cfg.scenario, cfg.metric, outcomes, thresholds, per_seed_acc)


# ---------------------------------------------------------------------------
# trajectory user linking
# ---------------------------------------------------------------------------

class HeuristicTULSolver:
    """Nearest-trace linking: a query maps to the user owning the closest
    training trajectory; exact ties resolve to the lowest user id."""

    def __init__(self, metric: str = "frechet", category_weight: float = 1.0) -> None:
        self._dist = trajectory_distance(metric, category_weight)
        self._train: list[Trajectory] | None = None

    def fit(self, d: Dataset) -> None:
        if len(d) == 0:
            raise ValueError("cannot fit on an empty dataset")
        self._train = sorted(d.trajectories, key=lambda t: (t.user_id, t.traj_id))

    def link(self, t: Trajectory) -> str:
        if self._train is None:
            raise RuntimeError("fit() must run before link()")
        best_user = None
        best_d = math.inf
        for cand in self._train:
            d = self._dist(t, cand)
            if d < best_d:
                best_d = d
                best_user = cand.user_id
        return best_user

    def accuracy(self, queries: Dataset) -> float:
        return float(np.mean([self.link(t) == t.user_id for t in queries]))


def tul_protocols(
    d_train: Dataset,
    q_target: Dataset,
    s_train: Dataset,
    s_target: Dataset,
    solver_factory: Callable[[], HeuristicTULSolver] = HeuristicTULSolver,
) -> tuple[TULResult, TULResult]:
    """Evaluate both linking protocols.

    Legacy: one solver trained on the real training set, tested on the real
    and on the blurred target sets. Fixed: a second solver trained on the
    blurred training set judges the blurred target set, so both test runs see
    data matching their training distribution.
    """
    solver_real = solver_factory()
    solver_real.fit(d_train)
    acc_real = solver_real.accuracy(q_target)
    acc_legacy_syn = solver_real.accuracy(s_target)

    solver_syn = solver_factory()
    solver_syn.fit(s_train)
    acc_fixed_syn = solver_syn.accuracy(s_target)

    return (
        TULResult("legacy", acc_real, acc_legacy_syn),
        TULResult("fixed", acc_real, acc_fixed_syn),
    )
