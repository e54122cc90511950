"""End-to-end scripted scenarios over the in-process broker and the dialog engine."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..events import Broker, encode_event
from ..speech.grammar import Grammar
from ..statechart import DialogEngine, parse_statechart
from .farm import chart_functions, load_animals, sentence_table
from .sim import EMOTIONS, HEAD_GESTURES, AgentSpec, ChildAgent, Logger, Perception, RobotsSim, Scheduler

SCENARIOS = ("gesture", "feeling", "pantomime", "assembly", "farm")

# modules each use-case exercises, and the robots that may run it
USE_CASES = {
    "gesture": ({"speech", "speaker", "gesture", "behavior"}, ("nao", "furhat", "zeno")),
    "pantomime": ({"speech", "speaker", "activity", "touch", "behavior"}, ("nao",)),
    "assembly": ({"tracking", "speaker", "behavior"}, ("nao", "zeno")),
    "farm": ({"speech", "speaker", "gesture", "touch", "behavior"}, ("nao", "furhat", "zeno")),
    "feeling": ({"touch", "behavior"}, ("furhat", "zeno")),
}

_PREFIXES = (
    (("sense", "speech"), "speech"),
    (("sense", "speaker"), "speaker"),
    (("sense", "gesture"), "gesture"),
    (("sense", "activity"), "activity"),
    (("sense", "touch"), "touch"),
    (("sense", "object"), "tracking"),
    (("sense", "assembly"), "tracking"),
    (("action",), "behavior"),
)

RETRY_LIMITS = {"speech": 2, "activity": 1}
SPEECH_EXPECTS = {"confirm", "name_activity", "voice", "guess", "pick_animal", "more"}
MAX_STEPS = 50_000

POSITIONS = {"child1": np.array([0.6, 1.2, 1.0]), "child2": np.array([-0.7, 1.3, 1.0])}


class ScenarioDeadlock(RuntimeError):
    def __init__(self, msg, report=None, trace=None):
        super().__init__(msg)
        self.report = report
        self.trace = trace or []


def module_of(name):
    segs = tuple(name.split("."))
    for prefix, mod in _PREFIXES:
        if segs[: len(prefix)] == prefix:
            return mod
    return None


def chart_text(name) -> str:
    return resources.files("childbot.scenarios").joinpath(f"data/{name}.chart").read_text()


def default_chart(name) -> Path:
    return Path(str(resources.files("childbot.scenarios").joinpath(f"data/{name}.chart")))


def load_scenario_chart(path):
    """Parse a scenario chart together with the shared prelude."""
    with open(path) as fh:
        body = fh.read()
    return parse_statechart(chart_text("common") + "\n" + body)


@dataclass
class ScenarioScript:
    scenario: str
    seed: int = 0
    agent: AgentSpec = field(default_factory=AgentSpec)
    chart: str | None = None
    robot: str | None = None
    modules: set | None = None  # perception modules to launch; default is the use-case's set

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.chart is None:
            self.chart = str(default_chart(self.scenario))
        if not Path(self.chart).is_file():
            raise FileNotFoundError(self.chart)
        if isinstance(self.agent, dict):
            self.agent = AgentSpec.from_json(self.agent)
        robots = USE_CASES[self.scenario][1]
        if self.robot is None:
            self.robot = robots[self.seed % len(robots)]
        if self.modules is None:
            self.modules = set(USE_CASES[self.scenario][0])


@dataclass
class RunReport:
    scenario: str
    seed: int
    robot: str
    duration: float  # simulated seconds
    interventions: int
    retries: dict
    helps: int
    finished: bool
    steps: int
    metrics: dict
    trace_path: str | None = None
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.interventions < 0 or self.helps < 0 or min(self.retries.values(), default=0) < 0:
            raise ValueError("counts must be non-negative")

    def to_dict(self):
        return asdict(self)


def scenario_grammar(name, animals, activities=()) -> Grammar:
    pairs = [("YES", "yes"), ("YES", "yes I did"), ("YES", "yes I am"), ("NEG", "no"),
             ("NEG", "no I did not"), ("NEG", "no I am not"), ("HELP", "help me")]
    game = "single"
    if name == "pantomime":
        pairs += [(a, "you are " + a.replace("_", " ")) for a in activities]
    if name == "farm":
        game = "cooperative"
        pairs += [(a.name, "the " + a.name) for a in animals]
        pairs += [("TRAIT", s) for s in sentence_table(animals)]
    labels, sents = zip(*pairs)
    return Grammar([tuple(s.lower().split()) for s in sents], list(labels), game)


def trace_bytes(events) -> bytes:
    return b"".join(encode_event(e) for e in events)


def write_trace(events, path):
    Path(path).write_bytes(trace_bytes(events))


def read_trace(path):
    from ..events import decode_event
    with open(path, "rb") as fh:
        return [decode_event(line) for line in fh if line.strip()]


def check_conformance(scenario, events):
    """Problems with the modules and robots a trace exercised (empty list = conformant)."""
    want, robots = USE_CASES[scenario]
    used = {m for m in (module_of(e.name) for e in events) if m}
    problems = []
    if used != want:
        extra, missing = sorted(used - want), sorted(want - used)
        problems.append(f"{scenario}: modules extra={extra} missing={missing}")
    for e in events:
        if e.name.startswith("action.") and e.params.get("robot") not in robots:
            problems.append(f"{scenario}: {e.name} on ineligible robot {e.params.get('robot')!r}")
            break
    return problems


def retry_runs(events):
    """Longest run of re-prompts per modality between fresh prompts."""
    worst = {"speech": 0, "activity": 0}
    run = {"speech": 0, "activity": 0}
    for e in events:
        if e.name != "action.speak":
            continue
        kind = e.params.get("kind")
        mod = "speech" if e.params.get("expect") in SPEECH_EXPECTS else "activity"
        if kind == "prompt":
            run[mod] = 0
        elif kind == f"reprompt_{mod}":
            run[mod] += 1
            worst[mod] = max(worst[mod], run[mod])
    return worst


def check_retry_bounds(events):
    worst = retry_runs(events)
    return [f"{m}: {worst[m]} consecutive re-prompts > {RETRY_LIMITS[m]}"
            for m in worst if worst[m] > RETRY_LIMITS[m]]


class _Run:
    def __init__(self, script: ScenarioScript, max_steps=MAX_STEPS):
        self.script = script
        self.max_steps = max_steps
        self.sched = Scheduler()
        self.broker = Broker(clock=self.sched.ms)
        self.rng = np.random.default_rng(script.seed)
        self.animals = load_animals()
        doc = load_scenario_chart(script.chart)
        functions = chart_functions(self.animals) if script.scenario == "farm" else {}
        variables = {"robot": script.robot}
        if "seed" in doc.variables:
            variables["seed"] = int(script.seed)

        self.logger = Logger(self.broker)
        self.robots = RobotsSim(self.broker, self.sched)
        self.dialog_conn = self.broker.connect("dialog", ["sense.**", "monitor.**"],
                                               deliver=self._incoming)
        self.engine = DialogEngine(doc, functions, sender="dialog", variables=variables)

        v = self.engine.variables
        activities = list(v.get("activities", []))
        gestures = list(v.get("gestures", [])) or list(HEAD_GESTURES)
        plan = list(v.get("plan", []))
        bricks = sorted({b for p in plan for b in p.split("-")})
        world = {
            "gestures": gestures,
            "cards": activities if script.scenario == "pantomime" else list(EMOTIONS),
            "pairs": [f"{a}-{b}" for i, a in enumerate(bricks) for b in bricks[i + 1:]],
            "brick_pose": lambda b: [round(0.04 * bricks.index(b), 3), 0.0, 0.02],
            "animals": self.animals,
            "areas": {a.name: a.area for a in self.animals},
        }
        names = [f"child{i + 1}" for i in range(script.agent.children)]
        positions = {n: POSITIONS.get(n, np.array([0.3 * i, 1.5, 1.0])) for i, n in enumerate(names)}
        grammar = scenario_grammar(script.scenario, self.animals, activities)
        self.perception = Perception(self.broker, self.sched, self.rng, script.modules, grammar,
                                     positions, script.agent.error_rate)
        self.child = ChildAgent(self.broker, self.sched, script.agent, self.rng, self.perception, world)
        self._armed = set()
        self._publish(self.engine.initial_emissions)
        self._arm()

    def _publish(self, events):
        for e in events:
            self.broker.publish(e)

    def _incoming(self, ev):
        self.sched.at(self.sched.now, self._step, ev)

    def _step(self, ev):
        if self.engine.finished:
            return
        self._publish(self.engine.advance(self.sched.now))
        self._publish(self.engine.feed(ev))
        self._arm()

    def _arm(self):
        for deadline, _ in self.engine.machine.timers.values():
            if deadline not in self._armed:
                self._armed.add(deadline)
                self.sched.at(deadline, self._wake, deadline)

    def _wake(self, deadline):
        self._armed.discard(deadline)
        if self.engine.finished:
            return
        self._publish(self.engine.advance(self.sched.now))
        self._arm()

    def run(self, trace_path=None) -> RunReport:
        t0 = time.perf_counter()
        while not self.engine.finished:
            if not len(self.sched):
                self._fail("no pending events while the dialog is in "
                           f"{self.engine.configuration}", trace_path, t0)
            if self.sched.steps >= self.max_steps:
                self._fail(f"no terminal state after {self.max_steps} steps", trace_path, t0)
            self.sched.pop()
        return self._report(trace_path, t0)

    def _fail(self, msg, trace_path, t0):
        report = self._report(trace_path, t0)
        raise ScenarioDeadlock(msg, report, self.logger.events)

    def _report(self, trace_path, t0) -> RunReport:
        events = self.logger.events
        if trace_path is not None:
            write_trace(events, trace_path)
        speaks = [e for e in events if e.name == "action.speak"]
        kinds = [e.params.get("kind") for e in speaks]
        retries = {"speech": kinds.count("reprompt_speech"), "activity": kinds.count("reprompt_activity")}
        helps = kinds.count("help")
        counts = {}
        for e in events:
            m = module_of(e.name)
            if m:
                counts[m] = counts.get(m, 0) + 1
        v = self.engine.variables
        outcome = {k: v[k] for k in ("correct", "robot_wins", "child_wins", "guesses") if k in v}
        p = self.perception
        metrics = {
            "events": dict(sorted(counts.items())),
            "outcome": outcome,
            "asr_label_accuracy": (p.asr_correct / p.asr_total) if p.asr_total else None,
            "utterances": p.asr_total,
        }
        return RunReport(self.script.scenario, int(self.script.seed), self.script.robot,
                         round(self.sched.now, 3), retries["speech"] + retries["activity"] + helps,
                         retries, helps, bool(self.engine.finished), self.sched.steps, metrics,
                         None if trace_path is None else str(trace_path),
                         time.perf_counter() - t0)


def simulate(script: ScenarioScript, trace_path=None, max_steps=MAX_STEPS):
    """Run one scenario; returns (report, events)."""
    run = _Run(script, max_steps)
    report = run.run(trace_path)
    return report, run.logger.events


def run_scenario(script: ScenarioScript, trace_path=None, max_steps=MAX_STEPS) -> RunReport:
    return simulate(script, trace_path, max_steps)[0]


def run_all(seeds, scenarios=SCENARIOS, agent=None, trace_dir=None):
    """Every scenario for every seed; returns (reports, problems)."""
    agent = agent or AgentSpec()
    reports, problems = [], []
    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
    for name in scenarios:
        for seed in seeds:
            path = None if trace_dir is None else Path(trace_dir) / f"{name}_{seed}.jsonl"
            report, events = simulate(ScenarioScript(name, seed, agent), path)
            reports.append(report)
            problems += [f"seed {seed}: {p}" for p in check_conformance(name, events)]
            problems += [f"{name} seed {seed}: {p}" for p in check_retry_bounds(events)]
    return reports, problems


def summarize(reports):
    out = {}
    for name in sorted({r.scenario for r in reports}):
        rs = [r for r in reports if r.scenario == name]
        out[name] = {
            "runs": len(rs),
            "finished": sum(r.finished for r in rs),
            "mean_duration": float(np.mean([r.duration for r in rs])),
            "mean_interventions": float(np.mean([r.interventions for r in rs])),
            "speech_retries": sum(r.retries["speech"] for r in rs),
            "activity_retries": sum(r.retries["activity"] for r in rs),
        }
    return out


def load_agent(path=None) -> AgentSpec:
    if path is None:
        text = resources.files("childbot.scenarios").joinpath("data/agent.json").read_text()
        return AgentSpec.from_json(json.loads(text))
    return AgentSpec.load(path)
