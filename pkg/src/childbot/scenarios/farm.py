"""Farm guessing game: animal inventory, reveal policy and guesser."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

CLASSES = ("species", "legs", "size", "color", "distinctive")  # general to specific
N_ANIMALS = 19
_NUMBERS = {0: "no", 2: "two", 4: "four", 6: "six", 8: "eight"}


class Exhausted(LookupError):
    """Every characteristic of the picked animal is already revealed."""


class NoConsistentAnimal(LookupError):
    pass


class InventoryError(ValueError):
    pass


@dataclass(frozen=True)
class Animal:
    name: str
    color: str
    size: str
    species: str
    legs: int
    distinctive: str
    area: str = "meadow"

    def value(self, cls):
        return getattr(self, cls)


def validate_inventory(animals):
    if len(animals) != N_ANIMALS:
        raise InventoryError(f"expected {N_ANIMALS} animals, got {len(animals)}")
    names = [a.name for a in animals]
    if len(set(names)) != len(names):
        raise InventoryError("animal names must be unique")
    for a in animals:
        for c in CLASSES:
            v = a.value(c)
            if v is None or v == "":
                raise InventoryError(f"{a.name} has no {c}")


def load_animals(path=None) -> list[Animal]:
    if path is None:
        text = resources.files("childbot.scenarios").joinpath("data/animals.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    raw = json.loads(text)
    animals = [Animal(**row) for row in raw["animals"]]
    validate_inventory(animals)
    return animals


def sentence(animal: Animal, cls: str) -> str:
    """What a player says to reveal one characteristic."""
    v = animal.value(cls)
    if cls == "species":
        return f"it is {'an' if v[0] in 'aeiou' else 'a'} {v}"
    if cls == "legs":
        return f"it has {_NUMBERS.get(v, str(v))} legs"
    if cls == "distinctive":
        return v
    return f"it is {v}"


def sentence_table(animals) -> dict:
    """Sentence -> (class, value)."""
    out = {}
    for a in animals:
        for c in CLASSES:
            s = sentence(a, c)
            prev = out.setdefault(s, (c, a.value(c)))
            if prev != (c, a.value(c)):
                raise InventoryError(f"sentence {s!r} is ambiguous")
    return out


@dataclass
class FarmGameState:
    animals: list
    picker: str = "robot"  # the other side guesses
    secret: Animal | None = None
    revealed: list = field(default_factory=list)  # (class, value)
    excluded: set = field(default_factory=set)  # names guessed wrong
    guesses: int = 0

    def __post_init__(self):
        validate_inventory(self.animals)
        if self.picker not in ("robot", "children"):
            raise ValueError("picker is robot or children")

    @property
    def guesser(self):
        return "children" if self.picker == "robot" else "robot"

    def pick(self, name):
        self.secret = next(a for a in self.animals if a.name == name)
        self.revealed, self.excluded, self.guesses = [], set(), 0

    def reveal(self):
        c = farm_next_characteristic(self)
        self.revealed.append((c, self.secret.value(c)))
        return c, self.secret.value(c)

    def consistent(self, revealed=None):
        revealed = self.revealed if revealed is None else revealed
        return [a for a in self.animals
                if a.name not in self.excluded and all(a.value(c) == v for c, v in revealed)]


def farm_next_characteristic(state: FarmGameState) -> str:
    if state.secret is None:
        raise ValueError("no animal picked")
    done = {c for c, _ in state.revealed}
    for c in CLASSES:
        if c not in done:
            return c
    raise Exhausted(state.secret.name)


def farm_guess(state: FarmGameState, revealed=None, rng=None) -> str:
    """Uniform draw among animals consistent with every revealed characteristic."""
    revealed = state.revealed if revealed is None else list(revealed)
    if not revealed:
        raise ValueError("reveal at least one characteristic before guessing")
    pool = state.consistent(revealed)
    if not pool:
        raise NoConsistentAnimal(str(revealed))
    rng = np.random.default_rng(rng)
    state.guesses += 1
    return pool[int(rng.integers(len(pool)))].name


def play_round(animals, secret, rng, reveal_first=1):
    """Perfect-information guesser: reveal, guess, exclude wrong ones.  Returns guesses used.

    ``reveal_first`` characteristics are revealed before the first guess; after
    that each wrong guess triggers one more reveal while any remain.
    """
    st = FarmGameState(animals, picker="robot")
    st.pick(secret)
    for _ in range(reveal_first):
        st.reveal()
    while True:
        g = farm_guess(st, rng=rng)
        if g == secret:
            return st.guesses
        st.excluded.add(g)
        try:
            st.reveal()
        except Exhausted:
            pass


def chart_functions(animals):
    """Pure host functions the farm chart calls."""
    by_name = {a.name: a for a in animals}
    table = sentence_table(animals)

    def pick_animal(seed, r):
        rng = np.random.default_rng([int(seed), int(r), 17])
        return animals[int(rng.integers(len(animals)))].name

    def next_trait(revealed):
        for c in CLASSES:
            if c not in revealed:
                return c
        return ""

    def describe(name, cls):
        return sentence(by_name[name], cls)

    def trait_code(name, cls):
        return f"{cls}={by_name[name].value(cls)}"

    def animal_of(text):
        words = str(text).split()
        return words[-1] if len(words) == 2 and words[0] == "the" and words[-1] in by_name else ""

    def robot_guess(facts, wrong, seed, r):
        revealed = [table[f] for f in facts if f in table]
        if not revealed:
            return ""
        st = FarmGameState(animals, picker="children", excluded=set(wrong))
        rng = np.random.default_rng([int(seed), int(r), len(facts), len(wrong)])
        try:
            return farm_guess(st, revealed, rng)
        except NoConsistentAnimal:
            return ""

    return {"pick_animal": pick_animal, "next_trait": next_trait, "describe": describe,
            "trait_code": trait_code, "animal_of": animal_of, "robot_guess": robot_guess}
