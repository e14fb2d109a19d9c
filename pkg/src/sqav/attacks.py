"""Adversary configurations understood by :func:`sqav.protocol.run_full_protocol`.

Each attack is a small frozen dataclass. ``attack_from_dict`` / ``attack_to_dict``
give the JSON form used in scenario files, e.g.::

    {"kind": "intercept", "x": 2, "target": "step1", "voter": 1}
    {"kind": "replace", "row": 0, "state": "zero"}
    {"kind": "double_vote", "attacker": 2, "box": 0, "extra": 1}
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import ConfigurationError
from .qstate import SparseState, basis_state

STEPS = ("step1", "step2")
INTERCEPT_MODELS = ("measure_resend", "fourier_resend")


@dataclass(frozen=True)
class InterceptSubset:
    """Eve intercepts ``x`` particles of one voter's sequence in transit."""

    x: int
    target: str = "step1"
    voter: int = 1
    model: str = "measure_resend"


@dataclass(frozen=True)
class ReplaceCopy:
    """One distributed copy is swapped for an arbitrary state."""

    row: int
    state: SparseState
    target: str = "step1"


@dataclass(frozen=True)
class Collusion:
    """Dishonest voters pool everything they hold."""

    dishonest: tuple


@dataclass(frozen=True)
class DoubleVote:
    """The attacker adds ``extra`` to a second ballot box in their own column."""

    attacker: int
    box: int
    extra: int


@dataclass(frozen=True)
class TamperBroadcast:
    """Cell ``(row, voter)`` of the released vote matrix is shifted by ``delta``."""

    row: int
    voter: int
    delta: int


@dataclass(frozen=True)
class Withhold:
    """A voter never commits a column to the simultaneous broadcast."""

    voter: int


AttackSpec = Union[InterceptSubset, ReplaceCopy, Collusion, DoubleVote, TamperBroadcast, Withhold]


def validate_attack(attack, n: int, m: int) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigurationError(f"{type(attack).__name__}: {msg}")

    if isinstance(attack, InterceptSubset):
        need(attack.x >= 1, "x must be at least 1")
        need(attack.target in STEPS, f"target must be one of {STEPS}")
        need(0 <= attack.voter < n, "voter out of range")
        need(attack.model in INTERCEPT_MODELS, f"model must be one of {INTERCEPT_MODELS}")
    elif isinstance(attack, ReplaceCopy):
        need(attack.target in STEPS, f"target must be one of {STEPS}")
        want_m = m if attack.target == "step1" else n
        need((attack.state.n, attack.state.m) == (n, want_m), "replacement state has the wrong shape")
        need(attack.row >= 0, "row must be non-negative")
    elif isinstance(attack, Collusion):
        bad = set(attack.dishonest)
        need(bad <= set(range(n)), "dishonest voter out of range")
        need(len(bad) < n, "at least one voter must be honest")
    elif isinstance(attack, DoubleVote):
        need(0 <= attack.attacker < n and 0 <= attack.box < n, "index out of range")
        need(0 <= attack.extra < m, "extra vote out of range")
    elif isinstance(attack, TamperBroadcast):
        need(0 <= attack.row < n and 0 <= attack.voter < n, "index out of range")
    elif isinstance(attack, Withhold):
        need(0 <= attack.voter < n, "voter out of range")
    else:
        raise ConfigurationError(f"unknown attack {attack!r}")


def attack_to_dict(attack) -> dict | None:
    if attack is None:
        return None
    if isinstance(attack, InterceptSubset):
        return {"kind": "intercept", "x": attack.x, "target": attack.target,
                "voter": attack.voter, "model": attack.model}
    if isinstance(attack, ReplaceCopy):
        return {"kind": "replace", "row": attack.row, "target": attack.target,
                "state": attack.state.to_json_dict()}
    if isinstance(attack, Collusion):
        return {"kind": "collusion", "dishonest": list(attack.dishonest)}
    if isinstance(attack, DoubleVote):
        return {"kind": "double_vote", "attacker": attack.attacker, "box": attack.box,
                "extra": attack.extra}
    if isinstance(attack, TamperBroadcast):
        return {"kind": "tamper", "row": attack.row, "voter": attack.voter, "delta": attack.delta}
    if isinstance(attack, Withhold):
        return {"kind": "withhold", "voter": attack.voter}
    raise ConfigurationError(f"unknown attack {attack!r}")


def _state_field(value, n: int, m: int) -> SparseState:
    if value == "zero":
        return basis_state([0] * n, m)
    if isinstance(value, dict):
        return SparseState.from_json_dict(value)
    raise ConfigurationError("replacement state must be 'zero' or a state dump")


def attack_from_dict(data, n: int, m: int):
    """Parse the JSON form; ``n``/``m`` resolve the ``"zero"`` state shorthand."""
    if data is None:
        return None
    data = dict(data)
    kind = data.pop("kind", None)
    try:
        if kind == "intercept":
            attack = InterceptSubset(**data)
        elif kind == "replace":
            target = data.get("target", "step1")
            state = _state_field(data.pop("state"), n, m if target == "step1" else n)
            attack = ReplaceCopy(state=state, **data)
        elif kind == "collusion":
            attack = Collusion(tuple(int(v) for v in data["dishonest"]))
        elif kind == "double_vote":
            attack = DoubleVote(**data)
        elif kind == "tamper":
            attack = TamperBroadcast(**data)
        elif kind == "withhold":
            attack = Withhold(**data)
        else:
            raise ConfigurationError(f"unknown attack kind {kind!r}")
    except (TypeError, KeyError) as exc:
        raise ConfigurationError(f"attack {kind!r}: {exc}") from None
    validate_attack(attack, n, m)
    return attack
