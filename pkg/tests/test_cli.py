import json
import threading

import pytest

from childbot.cli import main, parse_seeds
from childbot.events import BrokerClient, BrokerConfig, BrokerServer
from childbot.tracking import occlusion_scene, save_scene

GREETER = """initial idle
state idle:
  on sense.speech.rec -> greet(name=event.text)
state greet(name: str):
  entry: emit action.speak(robot="nao", text="hello " + name)
  on monitor.speak.done -> bye
final state bye:
"""


def test_parse_seeds():
    assert parse_seeds("1..4") == [1, 2, 3, 4]
    assert parse_seeds("3") == [3]
    assert parse_seeds("1,5, 9") == [1, 5, 9]


def test_run_scenario(tmp_path, capsys):
    rep, tr = tmp_path / "out.json", tmp_path / "trace.jsonl"
    assert main(["run-scenario", "--name", "farm", "--seed", "7", "--report", str(rep), "--trace", str(tr)]) == 0
    d = json.loads(rep.read_text())
    assert d["scenario"] == "farm" and d["problems"] == [] and d["finished"]
    lines = tr.read_text().splitlines()
    assert all(json.loads(x)["sender"] for x in lines)


def test_run_all_small(tmp_path):
    rep = tmp_path / "all.json"
    assert main(["run-all", "--seeds", "1..2", "--report", str(rep), "--trace-dir", str(tmp_path / "t")]) == 0
    d = json.loads(rep.read_text())
    assert d["runs"] == 10 and d["problems"] == []
    assert len(list((tmp_path / "t").glob("*.jsonl"))) == 10


def test_speech_eval(tmp_path):
    g = tmp_path / "g.tsv"
    g.write_text("YES\tyes\nDONE\tI am done\nNEG\tno I don't know\nNEG\tno\nANIMAL\tthe cow\nHELP\thelp me\nHELP\thelp\n")
    t = tmp_path / "t.jsonl"
    pairs = [("yes", "yes"), ("I am done", "I am done"), ("no I don't know", "no I do know"),
             ("the cow", "the cow"), ("help me", "help")]
    t.write_text("".join(json.dumps({"ref": r, "hyp": h}) + "\n" for r, h in pairs))
    rep = tmp_path / "r.json"
    assert main(["speech-eval", "--grammar", str(g), "--transcripts", str(t), "--report", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert round(d["raw"]["wcor"], 2) == 83.33 and d["raw"]["scor"] == 60.0


def test_localize_bench(tmp_path):
    rep = tmp_path / "loc.json"
    assert main(["localize-bench", "--trials", "3", "--report", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert d["n"] == 3 and 0.0 <= d["Pcor"] <= 1.0


def test_encode_bench_writes_and_reads_data(tmp_path):
    data = tmp_path / "desc"
    rep = tmp_path / "e.json"
    assert main(["encode-bench", "--data", str(data), "--encoding", "vlad", "--fusion", "score",
                 "--k", "4", "--report", str(rep)]) == 0
    first = json.loads(rep.read_text())
    assert (data / "synthetic.desc").exists()
    assert set(first["accuracy"]) == {"view0", "view1", "view2", "view3", "score"}
    # second run reads the file back and reproduces the numbers
    assert main(["encode-bench", "--data", str(data), "--encoding", "vlad", "--fusion", "score",
                 "--k", "4", "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["accuracy"] == first["accuracy"]


def test_track_bench_synthesises_frames(tmp_path):
    scene = tmp_path / "s.json"
    save_scene(occlusion_scene(n_before=3, n_occluded=1, n_after=1), scene)
    rep = tmp_path / "t.json"
    assert main(["track-bench", "--scene", str(scene), "--frames", str(tmp_path / "fr"),
                 "--particles", "50", "--report", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert d["frames"] == 5 and len(list((tmp_path / "fr").glob("*_depth.png"))) == 5
    assert all(o["mean_error_m"] < 0.02 for o in d["objects"].values())


def test_dialog_run_over_tcp(tmp_path):
    server = BrokerServer(BrokerConfig(port=0))
    host, port = server.serve_in_thread()
    try:
        chart = tmp_path / "greet.chart"
        chart.write_text(GREETER)
        trace = tmp_path / "trace.jsonl"
        rc = {}
        argv = ["dialog", "run", "--chart", str(chart), "--broker", f"{host}:{port}",
                "--trace", str(trace), "--max-seconds", "20"]
        th = threading.Thread(target=lambda: rc.setdefault("rc", main(argv)))
        th.start()
        with BrokerClient("robot", ["action.**"], host, port) as robot, \
                BrokerClient("asr", [], host, port) as asr:
            assert server.wait_for_clients(["dialog", "robot", "asr"])
            asr.publish("sense.speech.rec", {"text": "ann"})
            ev = robot.recv(timeout=10)
            assert ev.name == "action.speak" and ev.params["text"] == "hello ann"
            robot.publish("monitor.speak.done", {"robot": "nao"})
            th.join(timeout=20)
        assert rc.get("rc") == 0
        steps = [json.loads(x) for x in trace.read_text().splitlines()]
        assert steps[-1]["configuration"] == ["bye"]
        assert steps[1]["emissions"][0]["name"] == "action.speak"
    finally:
        server.close()


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["nope"])
