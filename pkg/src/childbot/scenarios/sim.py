"""Logical-time simulation: scheduler, simulated robots, perception stand-ins and child agents."""
from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..speaker import select_active_speaker
from ..speech.grammar import Grammar, recognize_constrained, tokenize
from .farm import CLASSES, FarmGameState, NoConsistentAnimal, farm_guess, sentence

EMOTIONS = ("happiness", "sadness", "fear", "anger", "surprise", "disgust")
HEAD_GESTURES = ("agree", "shake")

# seconds each robot behaviour takes
ACTION_TIME = {"look": 0.5, "behavior": 2.0, "point": 1.5, "mime": 4.0, "express": 2.5}

# perception latency after the child acts
LATENCY = {"speaker": 0.2, "gesture": 1.0, "activity": 2.0, "touch": 0.1, "tracking": 0.5}


class Scheduler:
    """Min-heap of (time, insertion order) callbacks; FIFO among equal times."""

    def __init__(self):
        self.now = 0.0
        self._heap = []
        self._n = itertools.count()
        self.steps = 0

    def at(self, t, fn, *args):
        heapq.heappush(self._heap, (max(float(t), self.now), next(self._n), fn, args))

    def after(self, dt, fn, *args):
        self.at(self.now + dt, fn, *args)

    def __len__(self):
        return len(self._heap)

    def pop(self):
        t, _, fn, args = heapq.heappop(self._heap)
        self.now = t
        self.steps += 1
        fn(*args)

    def ms(self):
        return int(round(self.now * 1000))


@dataclass
class AgentSpec:
    delay: tuple = (0.8, 2.5)  # response delay range, s
    error_rate: float = 0.1  # chance an answer or a recognition is wrong
    silence: float = 0.1  # chance the child does not react to a prompt
    children: int = 1
    silent_once: tuple = ()  # expect kinds the child ignores the first time they come up

    def __post_init__(self):
        self.silent_once = tuple(self.silent_once)
        self.delay = tuple(float(x) for x in self.delay)
        if len(self.delay) != 2 or not 0 <= self.delay[0] <= self.delay[1]:
            raise ValueError("delay must be (min, max) with 0 <= min <= max")
        for k in ("error_rate", "silence"):
            v = getattr(self, k)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{k} must be in [0, 1]")
        if self.children < 1:
            raise ValueError("at least one child")

    def to_json(self):
        d = asdict(self)
        d["delay"] = list(self.delay)
        d["silent_once"] = list(self.silent_once)
        return d

    @classmethod
    def from_json(cls, d):
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def speak_time(text):
    return round(0.6 + 0.3 * len(str(text).split()), 1)


class RobotsSim:
    """Answers every action.X with monitor.X.done once the behaviour finishes."""

    def __init__(self, broker, sched):
        self.sched = sched
        self.conn = broker.connect("robots", ["action.**"], deliver=self._incoming)

    def _incoming(self, ev):
        self.sched.at(self.sched.now, self._start, ev)

    def _start(self, ev):
        kind = ev.name.split(".", 1)[1]
        dt = speak_time(ev.params.get("text", "")) if kind == "speak" else ACTION_TIME.get(kind, 1.0)
        self.sched.after(dt, self._done, kind, dict(ev.params))

    def _done(self, kind, params):
        self.conn.publish(f"monitor.{kind}.done", params, ts=self.sched.ms())


class Perception:
    """Stand-ins for the perception modules; each one is its own broker client."""

    SENDERS = {"speech": "asr", "speaker": "speaker_loc", "gesture": "gesture_rec",
               "activity": "activity_rec", "touch": "touchscreen", "tracking": "tracker"}

    def __init__(self, broker, sched, rng, modules, grammar: Grammar | None, positions,
                 error_rate=0.0):
        self.sched = sched
        self.rng = rng
        self.grammar = grammar
        self.positions = positions
        self.error_rate = error_rate
        self.conns = {m: broker.connect(s) for m, s in self.SENDERS.items() if m in modules}
        self.asr_total = 0
        self.asr_correct = 0

    def active(self, module):
        return module in self.conns

    def _pub(self, module, name, params):
        if module in self.conns:
            self.conns[module].publish(name, params, ts=self.sched.ms())

    def _later(self, module, name, params, dt=None):
        if module in self.conns:
            self.sched.after(LATENCY.get(module, 0.0) if dt is None else dt, self._pub, module, name, params)

    # voice
    def utter(self, child, text):
        if "speaker" in self.conns:
            est = select_active_speaker(self.positions[child] + self.rng.normal(0, 0.1, 3),
                                        self.positions, self.sched.now)
            xyz = [round(float(v), 3) for v in est.audio]
            self._later("speaker", "sense.speaker", {"person": est.person or "unknown", "xyz": xyz})
        if "speech" in self.conns and self.grammar is not None:
            tokens = list(tokenize(text))
            if self.rng.random() < self.error_rate and tokens:
                vocab = sorted(self.grammar.vocab)
                tokens[int(self.rng.integers(len(tokens)))] = vocab[int(self.rng.integers(len(vocab)))]
            rec = recognize_constrained(tokens, self.grammar)
            self.asr_total += 1
            self.asr_correct += rec.label == self.grammar.label_of(tokenize(text))
            self._later("speech", "sense.speech.rec",
                        {"text": " ".join(rec.sentence), "label": rec.label, "distance": rec.distance},
                        dt=0.3 + 0.05 * len(tokens))

    def _classify(self, truth, classes):
        if self.rng.random() < self.error_rate and len(classes) > 1:
            others = [c for c in classes if c != truth]
            return others[int(self.rng.integers(len(others)))]
        return truth

    def gesture(self, g, classes):
        self._later("gesture", "sense.gesture.rec", {"gesture": self._classify(g, classes)})

    def activity(self, a, classes):
        self._later("activity", "sense.activity.rec", {"activity": self._classify(a, classes)})

    def touch_select(self, card):
        self._later("touch", "sense.touch.select", {"card": card})

    def touch_place(self, animal, area):
        self._later("touch", "sense.touch.place", {"animal": animal, "area": area})

    def connect(self, a, b, pose):
        self._later("tracking", "sense.object.pose", {"object": b, "r": pose, "q": [0.0, 0.0, 0.0, 1.0]})
        self._later("tracking", "sense.assembly.connection", {"a": a, "b": b, "pair": f"{a}-{b}"})

    def separate(self, pair):
        self._later("tracking", "sense.assembly.disconnection", {"pair": pair})


class ChildAgent:
    """Scripted child(ren) reacting to what the robot says.

    Reacts to ``monitor.speak.done``: the robot's utterance carries what it
    expects (``expect``) and the item it is about (``target``).
    """

    SILENT_OK = ("none", "new_round", "wrong", "undo")

    def __init__(self, broker, sched, spec: AgentSpec, rng, perception: Perception, world: dict):
        self.sched = sched
        self.spec = spec
        self.rng = rng
        self.p = perception
        self.world = world
        self.children = [f"child{i + 1}" for i in range(spec.children)]
        self.last = None  # what the child last did
        self.known = []  # farm: characteristics heard this round
        self.excluded = set()
        self.secret = None
        self.told = 0
        self.pending_silence = list(spec.silent_once)
        self.conn = broker.connect("child", ["monitor.speak.done"], deliver=self._heard)

    def _heard(self, ev):
        expect = ev.params.get("expect", "none")
        target = ev.params.get("target", "")
        if expect == "new_round":
            self.known, self.excluded = [], set()
        elif expect == "wrong":
            self.excluded.add(target)
        elif expect == "undo":
            self.sched.after(self._delay(), self.p.separate, target)
        if expect in self.SILENT_OK:
            return
        if expect in self.pending_silence:
            self.pending_silence.remove(expect)
            return
        if self.rng.random() < self.spec.silence:
            return
        self.sched.after(self._delay(), self._respond, expect, target)

    def _delay(self):
        lo, hi = self.spec.delay
        return float(lo + (hi - lo) * self.rng.random())

    def _wrong(self):
        return self.rng.random() < self.spec.error_rate

    def _pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def _say(self, text):
        self.p.utter(self._pick(self.children), text)

    def _respond(self, expect, target):
        w = self.world
        if expect == "gesture":
            self.last = target
            self.p.gesture(target, w["gestures"])
        elif expect == "confirm":
            self._say(self._pick(("yes", "yes I did")) if target == self.last else self._pick(("no", "no I did not")))
        elif expect == "touch":
            self.last = self._pick(w["cards"])
            self.p.touch_select(self.last)
        elif expect == "activity":
            self.last = target
            self.p.activity(target, w["cards"])
        elif expect == "name_activity":
            act = self._pick(w["cards"]) if self._wrong() else target
            self._say("you are " + act.replace("_", " "))
        elif expect == "voice":
            self._say("hi robot")
        elif expect == "assembly":
            pairs = w["pairs"]
            pair = self._pick([p for p in pairs if p != target]) if self._wrong() else target
            a, b = pair.split("-")
            self.p.connect(a, b, w["brick_pose"](b))
        elif expect == "guess":
            self._guess(target)
        elif expect == "place":
            self.p.touch_place(target, w["areas"].get(target, "meadow"))
        elif expect == "pick_animal":
            self.secret = self._pick(w["animals"])
            self.told = 0
            self._tell()
        elif expect == "more":
            self._tell()
        elif expect == "nod":
            yes = self.secret is not None and target == self.secret.name
            if self._wrong():
                yes = not yes
            self.p.gesture("agree" if yes else "shake", HEAD_GESTURES)

    def _guess(self, code):
        cls, _, value = code.partition("=")
        if cls in CLASSES:
            self.known.append((cls, int(value) if cls == "legs" else value))
        state = FarmGameState(self.world["animals"], picker="robot", excluded=set(self.excluded))
        try:
            name = farm_guess(state, self.known, self.rng) if self.known else None
        except NoConsistentAnimal:
            name = None
        if name is None or self._wrong():
            name = self._pick(self.world["animals"]).name
        self._say("the " + name)

    def _tell(self):
        if self.secret is None:
            return
        cls = CLASSES[min(self.told, len(CLASSES) - 1)]
        self.told += 1
        self._say(sentence(self.secret, cls))


class Logger:
    """Records every routed event in delivery order."""

    def __init__(self, broker):
        self.events = []
        broker.connect("logger", ["**"], deliver=self.events.append)
