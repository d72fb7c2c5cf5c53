"""Non-cooperative binary games: questions, parity winning conditions, payoffs.

Answers and inputs are bit-strings with player 1 as the leftmost character;
an answer string ``a`` has table index ``int(a, 2)``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import InvalidPayoffError, InvalidQuestionError, NormalizationError, SchemaError


class GameFamily(str, Enum):
    NC_C3 = "NC_C3"
    NC00_C5 = "NC00_C5"
    NC01_C5 = "NC01_C5"


@dataclass(frozen=True)
class CustomFamily:
    """Explicit question/winning table; ``winning`` rows are (question, mask, target)."""

    n: int
    questions: tuple[str, ...]
    winning: tuple[tuple[str, str, int], ...]
    name: str = "custom"


def _c5_rule(players: tuple[int, ...]) -> str:
    return "".join("1" if p in players else "0" for p in range(1, 6))


# (question, players whose answers enter the parity, target parity), in table order
_TABLES = {
    GameFamily.NC_C3: (3, [
        ("100", "111", 0),
        ("010", "111", 0),
        ("001", "111", 0),
        ("111", "111", 1),
    ]),
    GameFamily.NC00_C5: (5, [
        ("10000", _c5_rule((5, 1, 2)), 0),
        ("01000", _c5_rule((1, 2, 3)), 0),
        ("00100", _c5_rule((2, 3, 4)), 0),
        ("00010", _c5_rule((3, 4, 5)), 0),
        ("00001", _c5_rule((4, 5, 1)), 0),
        ("11111", "11111", 1),
    ]),
    GameFamily.NC01_C5: (5, [
        ("10100", _c5_rule((5, 1, 2)), 0),
        ("01010", _c5_rule((1, 2, 3)), 0),
        ("00101", _c5_rule((2, 3, 4)), 0),
        ("10010", _c5_rule((3, 4, 5)), 0),
        ("01001", _c5_rule((4, 5, 1)), 0),
        ("11111", "11111", 1),
    ]),
}

# cycle graphs the built-in games are associated with (1-based players)
CYCLE_EDGES = {
    GameFamily.NC_C3: ((1, 2), (2, 3), (3, 1)),
    GameFamily.NC00_C5: ((1, 2), (2, 3), (3, 4), (4, 5), (5, 1)),
    GameFamily.NC01_C5: ((1, 2), (2, 3), (3, 4), (4, 5), (5, 1)),
}


def bitstrings(n: int) -> list[str]:
    return ["".join(b) for b in itertools.product("01", repeat=n)]


@dataclass(frozen=True)
class GameSpec:
    n: int
    questions: tuple[str, ...]
    winning: tuple[tuple[str, str, int], ...]
    v0: float
    v1: float
    prior: tuple[float, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        if not (self.v0 > 0 and self.v1 > 0):
            raise InvalidPayoffError(f"payoffs must be positive, got v0={self.v0}, v1={self.v1}")
        if self.n < 1:
            raise SchemaError("a game needs at least one player")
        if not self.questions:
            raise SchemaError("a game needs at least one question")
        for q in self.questions:
            if len(q) != self.n or set(q) - {"0", "1"}:
                raise SchemaError(f"question {q!r} is not a bit-string of length {self.n}")
        if len(set(self.questions)) != len(self.questions):
            raise SchemaError("duplicate question")
        for row in self.winning:
            if len(row) != 3:
                raise SchemaError(f"winning row {row!r} must be [question, mask, target]")
            q, mask, target = row
            if q not in self.questions:
                raise SchemaError(f"winning row refers to unknown question {q!r}")
            if len(mask) != self.n or set(mask) - {"0", "1"}:
                raise SchemaError(f"parity mask {mask!r} is not a bit-string of length {self.n}")
            if target not in (0, 1):
                raise SchemaError(f"parity target must be 0 or 1, got {target!r}")
        if not self.prior:
            k = len(self.questions)
            object.__setattr__(self, "prior", tuple([1.0 / k] * k))
        prior = np.asarray(self.prior, dtype=float)
        if prior.shape != (len(self.questions),):
            raise SchemaError("prior must have one entry per question")
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-12:
            raise NormalizationError("prior must be nonnegative and sum to 1")

    # -- derived tables ---------------------------------------------------
    @cached_property
    def answers(self) -> list[str]:
        return bitstrings(self.n)

    @cached_property
    def answer_bits(self) -> np.ndarray:
        """(2**n, n) array of answer bits."""
        idx = np.arange(2 ** self.n)
        return (idx[:, None] >> (self.n - 1 - np.arange(self.n))[None, :]) & 1

    @cached_property
    def inputs(self) -> tuple[str, ...]:
        """All 2**n mediator inputs: the questions in table order, then the rest."""
        rest = [s for s in bitstrings(self.n) if s not in self.questions]
        return tuple(self.questions) + tuple(rest)

    @cached_property
    def prior_array(self) -> np.ndarray:
        return np.asarray(self.prior, dtype=float)

    @cached_property
    def win(self) -> np.ndarray:
        """Boolean (|T|, 2**n): whether (a, t) is a winning pair."""
        out = np.zeros((len(self.questions), 2 ** self.n), dtype=bool)
        conds: dict[str, list] = {}
        for q, mask, target in self.winning:
            conds.setdefault(q, []).append((mask, target))
        bits = self.answer_bits
        for k, q in enumerate(self.questions):
            if q not in conds:
                continue
            ok = np.ones(2 ** self.n, dtype=bool)
            for mask, target in conds[q]:
                m = np.array([c == "1" for c in mask])
                ok &= (bits[:, m].sum(axis=1) % 2) == target
            out[k] = ok
        return out

    @cached_property
    def utility(self) -> np.ndarray:
        """(n, |T|, 2**n) payoffs u_i(a, t)."""
        vals = np.where(self.answer_bits == 0, self.v0, self.v1).T  # (n, 2**n)
        return self.win[None, :, :] * vals[:, None, :]

    @cached_property
    def welfare_weights(self) -> np.ndarray:
        """(|T|, 2**n) coefficients of P(a|t) in the social welfare."""
        return self.utility.mean(axis=0) * self.prior_array[:, None]

    @property
    def vmax(self) -> float:
        return max(self.v0, self.v1)

    def question_index(self, question: str) -> int:
        try:
            return self.questions.index(question)
        except ValueError:
            raise InvalidQuestionError(f"{question!r} is not a valid question") from None

    def with_payoffs(self, v0: float, v1: float) -> "GameSpec":
        return GameSpec(self.n, self.questions, self.winning, v0, v1, self.prior, self.name)

    # -- serialisation ----------------------------------------------------
    def to_json(self) -> dict:
        out = {"n": self.n, "questions": list(self.questions),
               "winning": [[q, m, t] for q, m, t in self.winning],
               "v0": self.v0, "v1": self.v1}
        if any(abs(p - 1.0 / len(self.prior)) > 1e-15 for p in self.prior):
            out["prior"] = list(self.prior)
        return out

    @classmethod
    def from_json(cls, data: dict | str, name: str = "custom") -> "GameSpec":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            n = int(data["n"])
            questions = tuple(str(q) for q in data["questions"])
            winning = tuple((str(q), str(m), int(t)) for q, m, t in data["winning"])
            v0, v1 = float(data["v0"]), float(data["v1"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad game JSON: {exc!r}") from None
        prior = tuple(float(p) for p in data.get("prior", ()))
        return cls(n, questions, winning, v0, v1, prior, data.get("name", name))


def build_game(family, v0: float, v1: float) -> GameSpec:
    """Instantiate a built-in family (or a :class:`CustomFamily`) at payoffs (v0, v1)."""
    if not (v0 > 0 and v1 > 0):
        raise InvalidPayoffError(f"payoffs must be positive, got v0={v0}, v1={v1}")
    if isinstance(family, CustomFamily):
        return GameSpec(family.n, tuple(family.questions), tuple(family.winning), v0, v1,
                        name=family.name)
    family = GameFamily(family)
    n, rows = _TABLES[family]
    return GameSpec(n, tuple(r[0] for r in rows), tuple(rows), float(v0), float(v1),
                    name=family.value)


def game_at_ratio(family, ratio: float, total: float = 2.0) -> GameSpec:
    """Game with v0/(v0+v1) = ratio and v0+v1 = total."""
    return build_game(family, ratio * total, (1.0 - ratio) * total)


def payoff(game: GameSpec, player: int, answer: str, question: str) -> float:
    """u_i(a, t) for a 0-based player index."""
    k = game.question_index(question)
    if len(answer) != game.n or set(answer) - {"0", "1"}:
        raise SchemaError(f"answer {answer!r} is not a bit-string of length {game.n}")
    return float(game.utility[player, k, int(answer, 2)])


def social_welfare(game: GameSpec, dist, tol: float = 1e-9) -> float:
    """Mean payoff over players under ``dist`` and the game's prior."""
    P = dist.rows(game.questions, tol=tol)
    return float(np.sum(game.welfare_weights * P))
