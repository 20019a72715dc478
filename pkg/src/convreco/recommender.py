"""Product ranking: biased matrix factorization blended with slot-constraint
match, rejection-aware, with online feedback updates.

The SGD update for one record (u, i, value):

    e   = value - predict(u, i)
    b_u += lr * (e - reg * b_u)
    b_i += lr * (e - reg * b_i)
    p_u += lr * (e * q_i - reg * p_u)
    q_i += lr * (e * p_u_old - reg * q_i)     # pre-update user vector

which is exactly -lr times the gradient of the per-record regularized
squared loss 0.5*e^2 + 0.5*reg*(b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2), so the
whole step is checkable against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog, Product, satisfies
from .domain import RandomSource, SlotValue
from .state import DialogueState


@dataclass(frozen=True)
class InteractionRecord:
    user_id: str
    product_id: str
    value: float  # 1.0 purchase/accept, 0.0 reject; ratings files may carry [0,5]


@dataclass(frozen=True)
class Hyperparams:
    k: int = 8
    learning_rate: float = 0.01
    regularization: float = 0.05
    epochs: int = 30
    init_scale: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class FactorModel:
    global_bias: float
    user_bias: dict[str, float] = field(hash=False)
    item_bias: dict[str, float] = field(hash=False)
    user_factors: dict[str, np.ndarray] = field(hash=False)
    item_factors: dict[str, np.ndarray] = field(hash=False)
    k: int = 8


def zero_model(k: int = 8, global_bias: float = 0.0) -> FactorModel:
    return FactorModel(
        global_bias=global_bias, user_bias={}, item_bias={}, user_factors={}, item_factors={}, k=k
    )


def predict(model: FactorModel, user: str, item: str) -> float:
    """Biased-MF score; unknown users/items fall back to zero bias/factors."""
    score = model.global_bias
    score += model.user_bias.get(user, 0.0)
    score += model.item_bias.get(item, 0.0)
    p = model.user_factors.get(user)
    q = model.item_factors.get(item)
    if p is not None and q is not None:
        score += float(np.dot(p, q))
    return score


def _init_vec(rng: RandomSource, k: int, scale: float) -> np.ndarray:
    return np.array([rng.uniform(-scale, scale) for _ in range(k)], dtype=np.float64)


def _sgd_step(
    model: FactorModel, user: str, item: str, value: float, h: Hyperparams
) -> None:
    """One in-place SGD step; callers own the (mutable) model copy."""
    lr, reg, k = h.learning_rate, h.regularization, model.k
    bu = model.user_bias.get(user, 0.0)
    bi = model.item_bias.get(item, 0.0)
    p = model.user_factors.get(user)
    q = model.item_factors.get(item)
    if p is None:
        p = np.zeros(k)
    if q is None:
        q = np.zeros(k)
    e = value - (model.global_bias + bu + bi + float(np.dot(p, q)))
    p_old = p.copy()
    model.user_bias[user] = bu + lr * (e - reg * bu)
    model.item_bias[item] = bi + lr * (e - reg * bi)
    model.user_factors[user] = p + lr * (e * q - reg * p)
    model.item_factors[item] = q + lr * (e * p_old - reg * q)


def train_mf(data: list[InteractionRecord], h: Hyperparams) -> FactorModel:
    """SGD matrix factorization: factors drawn uniformly in
    [-init_scale, init_scale] from the seed (first-appearance order), then
    `epochs` passes over the data in its given order. Fully deterministic."""
    if not data:
        raise ValueError("no training data")
    rng = RandomSource(h.seed)
    user_factors: dict[str, np.ndarray] = {}
    item_factors: dict[str, np.ndarray] = {}
    for rec in data:
        if rec.user_id not in user_factors:
            user_factors[rec.user_id] = _init_vec(rng, h.k, h.init_scale)
        if rec.product_id not in item_factors:
            item_factors[rec.product_id] = _init_vec(rng, h.k, h.init_scale)
    model = FactorModel(
        global_bias=sum(r.value for r in data) / len(data),
        user_bias={u: 0.0 for u in user_factors},
        item_bias={i: 0.0 for i in item_factors},
        user_factors=user_factors,
        item_factors=item_factors,
        k=h.k,
    )
    for _ in range(h.epochs):
        for rec in data:
            _sgd_step(model, rec.user_id, rec.product_id, rec.value, h)
    return model


def feedback_update(
    model: FactorModel, user: str, item: str, outcome: str, h: Hyperparams
) -> FactorModel:
    """One SGD step from in-conversation feedback; returns a new snapshot
    (copy-on-write, serving reads stay on the old one)."""
    value = 1.0 if outcome == "accept" else 0.0
    new = FactorModel(
        global_bias=model.global_bias,
        user_bias=dict(model.user_bias),
        item_bias=dict(model.item_bias),
        user_factors={u: v for u, v in model.user_factors.items()},
        item_factors={i: v for i, v in model.item_factors.items()},
        k=model.k,
    )
    _sgd_step(new, user, item, value, h)
    return new


def slot_match_score(product: Product, constraints: list[SlotValue]) -> float:
    """Fraction of constraints the product satisfies; vacuously 1.0."""
    if not constraints:
        return 1.0
    hits = sum(1 for c in constraints if satisfies(product, c))
    return hits / len(constraints)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def has_candidates(state: DialogueState, catalog: Catalog) -> bool:
    """Cheap existence check for recommend legality (no scoring)."""
    required = set(catalog.schema.required_names)
    hard = [sv for name, sv in state.filled.items() if name in required]
    excluded = set(state.shown_items) | state.rejected_items
    for product in catalog.products:
        if product.id in excluded:
            continue
        if all(satisfies(product, c) for c in hard):
            return True
    return False


def recommend(
    model: FactorModel,
    state: DialogueState,
    user: str,
    catalog: Catalog,
    n: int,
    blend_alpha: float = 0.7,
) -> list[tuple[str, float]]:
    """Top-n candidates by blended score.

    Candidates must match every *required* slot already filled and must not
    have been shown or rejected this session. The score blends the squashed
    MF prediction with the match fraction over *all* filled slots, so
    volunteered optional constraints influence the order without hard
    filtering. Ties break by catalog order.
    """
    required = set(catalog.schema.required_names)
    hard = [sv for name, sv in state.filled.items() if name in required]
    soft = list(state.filled.values())
    excluded = set(state.shown_items) | state.rejected_items
    scored: list[tuple[str, float]] = []
    for pos, product in enumerate(catalog.products):
        if product.id in excluded:
            continue
        if not all(satisfies(product, c) for c in hard):
            continue
        score = blend_alpha * _sigmoid(predict(model, user, product.id))
        score += (1.0 - blend_alpha) * slot_match_score(product, soft)
        scored.append((product.id, score, pos))
    scored.sort(key=lambda t: (-t[1], t[2]))
    return [(pid, score) for pid, score, _ in scored[:n]]
