"""``childbot`` command line: broker, dialog runner, benchmarks and scenarios."""
from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

log = logging.getLogger("childbot")


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, default=_jsonable)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(type(x).__name__)


def _addr(text, default_port=1932):
    host, _, port = text.rpartition(":")
    if not host:
        return text, default_port
    return host, int(port)


def parse_seeds(text):
    """``1..20``, ``3`` or ``1,4,9``."""
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(s) for s in text.split(",") if s.strip()]


# broker / dialog

def cmd_broker(args):
    from .events import BrokerConfig, BrokerServer

    host, port = _addr(args.bind)
    server = BrokerServer(BrokerConfig(host, port, args.max_frame))
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        pass
    return 0


def cmd_dialog_run(args):
    from .events import BrokerClient
    from .scenarios.harness import load_scenario_chart
    from .statechart import DialogEngine, load_statechart

    doc = load_scenario_chart(args.chart) if args.prelude else load_statechart(args.chart)
    variables = {}
    for kv in args.var or []:
        k, _, v = kv.partition("=")
        try:
            variables[k] = json.loads(v)
        except json.JSONDecodeError:
            variables[k] = v
    host, port = _addr(args.broker)
    client = BrokerClient(args.name, ["sense.**", "monitor.**"], host, port)
    t0 = time.monotonic()
    engine = DialogEngine(doc, sender=args.name, variables=variables)
    for e in engine.initial_emissions:
        client.send(e)
    try:
        while not engine.finished:
            now = time.monotonic() - t0
            if args.max_seconds and now > args.max_seconds:
                log.warning("stopping after %.1f s", now)
                break
            deadlines = [d for d, _ in engine.machine.timers.values()]
            wait = max(0.0, min(deadlines) - now) if deadlines else 0.5
            ev = client.recv(timeout=min(wait, 0.5) or 0.001)
            out = engine.advance(time.monotonic() - t0)
            if ev is not None:
                out += engine.feed(ev)
            for e in out:
                client.send(e)
    finally:
        client.close()
        if args.trace:
            with open(args.trace, "w") as fh:
                for rec in engine.trace:
                    fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return 0 if engine.finished else 1


# benchmarks

def cmd_localize_bench(args):
    from .audio import default_geometry, load_geometry, localization_bench

    geo = load_geometry(args.geometry) if args.geometry else default_geometry()
    rep = localization_bench(geo, args.snr, args.trials, args.grid, args.seed)
    _write_json(args.report, rep)
    return 0


def _descriptor_file(path):
    p = Path(path)
    if p.is_dir():
        found = sorted(p.glob("*.desc"))
        if len(found) != 1:
            raise SystemExit(f"{p}: expected exactly one *.desc file, found {len(found)}")
        return found[0]
    return p


def cmd_encode_bench(args):
    from .activity import load_descriptors, run_loocv_modes, save_descriptors, synthetic_corpus

    if args.data and Path(args.data).exists():
        ds = load_descriptors(_descriptor_file(args.data))
    else:
        ds = synthetic_corpus(args.synthetic)
        if args.data:
            Path(args.data).mkdir(parents=True, exist_ok=True)
            save_descriptors(ds, Path(args.data) / "synthetic.desc")
    views = [f"view{i}" for i in range(ds.sensors)]
    if args.fusion == "all":
        modes = views + ["feature", "encoding", "score"]
    elif args.fusion == "single":
        modes = views
    else:
        modes = views + [args.fusion]
    res = run_loocv_modes(ds, args.encoding, modes, k=args.k, seed=args.seed)
    rep = {"encoding": args.encoding, "k": args.k, "videos": len(ds), "classes": ds.classes,
           "accuracy": {m: r.accuracy for m, r in res.items()},
           "confusion": {m: r.confusion.tolist() for m, r in res.items()}}
    rep["best_single_view"] = max(rep["accuracy"][v] for v in views)
    _write_json(args.report, rep)
    return 0


def cmd_track_bench(args):
    from .tracking import assembly_scene, eval_identification, load_scene, occlusion_scene, run_scene
    from .tracking import save_scene, write_frames

    scene_path = Path(args.scene)
    if scene_path.exists():
        scene = load_scene(scene_path)
    else:
        scene = assembly_scene() if args.make == "assembly" else occlusion_scene()
        save_scene(scene, scene_path)
    frames = Path(args.frames) if args.frames else None
    if frames is not None and not any(frames.glob("*_depth.png")):
        write_frames(scene, frames)
    out = run_scene(scene, frames, seed=args.seed, n_particles=args.particles)
    rep = {"frames": len(scene.frames), "objects": {}}
    for oid, errs in out["errors"].items():
        e = np.asarray(errs)
        rep["objects"][oid] = {"mean_error_m": float(e.mean()), "max_error_m": float(e.max()),
                               "final_error_m": float(e[-1])}
    rep["connections"] = out["connections"]
    if scene.connections:
        rep["identification"] = {str(h): v for h, v in
                                 eval_identification(out["connections"], scene.connections).items()}
    _write_json(args.report, rep)
    return 0


def cmd_speech_eval(args):
    from .speech import evaluate_transcripts, load_grammar, read_transcripts

    rep = evaluate_transcripts(read_transcripts(args.transcripts), load_grammar(args.grammar))
    _write_json(args.report, rep)
    return 0


# scenarios

def _agent(path):
    from .scenarios import load_agent
    return load_agent(path)


def cmd_run_scenario(args):
    from .scenarios import ScenarioDeadlock, ScenarioScript, check_conformance, check_retry_bounds
    from .scenarios import simulate

    script = ScenarioScript(args.name, args.seed, _agent(args.agent), args.chart, args.robot)
    try:
        report, events = simulate(script, args.trace)
    except ScenarioDeadlock as exc:
        log.error("deadlock: %s", exc)
        if exc.report is not None:
            _write_json(args.report, exc.report.to_dict())
        return 2
    d = report.to_dict()
    d["problems"] = check_conformance(args.name, events) + check_retry_bounds(events)
    _write_json(args.report, d)
    return 0 if not d["problems"] else 1


def cmd_run_all(args):
    from .scenarios import SCENARIOS, ScenarioDeadlock, run_all, summarize

    seeds = parse_seeds(args.seeds)
    t0 = time.perf_counter()
    try:
        reports, problems = run_all(seeds, SCENARIOS, _agent(args.agent), args.trace_dir)
    except ScenarioDeadlock as exc:
        log.error("deadlock: %s", exc)
        return 2
    elapsed = time.perf_counter() - t0
    rep = {"seeds": seeds, "runs": len(reports), "seconds": elapsed, "problems": problems,
           "scenarios": summarize(reports)}
    _write_json(args.report, rep)
    ok = not problems and all(r.finished for r in reports)
    if args.budget and elapsed > args.budget:
        log.error("run-all took %.1f s (budget %.1f s)", elapsed, args.budget)
        ok = False
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="childbot")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("broker", help="run the TCP event broker")
    b.add_argument("--bind", default="127.0.0.1:1932")
    b.add_argument("--max-frame", type=int, default=65536)
    b.set_defaults(fn=cmd_broker)

    d = sub.add_parser("dialog", help="dialog engine")
    dsub = d.add_subparsers(dest="dialog_command", required=True)
    dr = dsub.add_parser("run", help="run a chart against a broker")
    dr.add_argument("--chart", required=True)
    dr.add_argument("--broker", default="127.0.0.1:1932")
    dr.add_argument("--trace")
    dr.add_argument("--name", default="dialog")
    dr.add_argument("--var", action="append", help="NAME=JSON initial variable override")
    dr.add_argument("--prelude", action="store_true", help="parse with the scenario prelude")
    dr.add_argument("--max-seconds", type=float, default=0.0)
    dr.set_defaults(fn=cmd_dialog_run)

    lb = sub.add_parser("localize-bench", help="synthetic SRP-PHAT localization benchmark")
    lb.add_argument("--geometry")
    lb.add_argument("--snr", type=float, default=20.0)
    lb.add_argument("--trials", type=int, default=100)
    lb.add_argument("--grid", type=float, default=0.1)
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--report")
    lb.set_defaults(fn=cmd_localize_bench)

    eb = sub.add_parser("encode-bench", help="LOOCV activity recognition benchmark")
    eb.add_argument("--data", help="descriptor file or directory with one *.desc file")
    eb.add_argument("--synthetic", type=int, default=1, help="corpus seed when --data is absent")
    eb.add_argument("--encoding", choices=("bovw", "vlad"), default="vlad")
    eb.add_argument("--fusion", choices=("single", "feature", "encoding", "score", "all"), default="all")
    eb.add_argument("--k", type=int, default=None)
    eb.add_argument("--seed", type=int, default=0)
    eb.add_argument("--report")
    eb.set_defaults(fn=cmd_encode_bench)

    tb = sub.add_parser("track-bench", help="track a synthetic scene")
    tb.add_argument("--scene", required=True)
    tb.add_argument("--frames")
    tb.add_argument("--make", choices=("occlusion", "assembly"), default="occlusion",
                    help="scene to generate when --scene does not exist")
    tb.add_argument("--seed", type=int, default=0)
    tb.add_argument("--particles", type=int, default=200)
    tb.add_argument("--report")
    tb.set_defaults(fn=cmd_track_bench)

    se = sub.add_parser("speech-eval", help="WCOR/SCOR/LabelCOR of transcripts")
    se.add_argument("--grammar", required=True)
    se.add_argument("--transcripts", required=True)
    se.add_argument("--report")
    se.set_defaults(fn=cmd_speech_eval)

    rs = sub.add_parser("run-scenario", help="run one scripted scenario")
    rs.add_argument("--name", required=True, choices=("gesture", "feeling", "pantomime", "assembly", "farm"))
    rs.add_argument("--seed", type=int, default=0)
    rs.add_argument("--agent", help="child agent JSON")
    rs.add_argument("--chart")
    rs.add_argument("--robot")
    rs.add_argument("--report")
    rs.add_argument("--trace")
    rs.set_defaults(fn=cmd_run_scenario)

    ra = sub.add_parser("run-all", help="every scenario for every seed")
    ra.add_argument("--seeds", default="1..20")
    ra.add_argument("--agent")
    ra.add_argument("--trace-dir")
    ra.add_argument("--report")
    ra.add_argument("--budget", type=float, default=180.0, help="seconds; 0 disables the check")
    ra.set_defaults(fn=cmd_run_all)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
