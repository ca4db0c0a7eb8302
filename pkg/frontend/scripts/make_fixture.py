"""Regenerate the frontend replay fixtures from the Python gateway.

Runs a scripted session — create, then 20 steps along a rotate-and-return
sweep — records the step log, replays it headlessly through a fresh
session, and writes both JSONL files plus the create request and final
session state. The frontend test asserts the recorded and replayed logs
match byte for byte and that the UI renders exactly the retrieved ids.

Usage: python3 frontend/scripts/make_fixture.py
"""
from pathlib import Path

from covis import jsonio
from covis.gateway import SessionManager, pose_doc, replay_step_log
from covis.geometry import CameraPose
from covis.trajectory import rotate_and_return

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "test" / "fixtures"

CREATE_REQUEST = {
    "world": {"seed": 7, "bounds": [0.0, 0.0, 60.0, 60.0], "density": 1.5},
    "start": {"x": 30.0, "y": 30.0, "yaw": 0.0},
    # recent-window fills the whole budget by step 20, so the fixture
    # contains a full 20-id StepResult for the apply-latency check
    "retrieval": {"strategy": "recent-window", "k": 20, "seed": 7},
}


def main() -> None:
    traj = rotate_and_return(CameraPose(30.0, 30.0, 0.0), 360.0, 154)
    manager = SessionManager()
    session = manager.create(CREATE_REQUEST)
    step_targets = [traj.frames[(i + 1) * len(traj) // 21].pose for i in range(20)]
    for pose in step_targets:
        session.step({"target": pose_doc(pose)})

    recorded = session.log_jsonl()
    lines = recorded.splitlines()
    replayed = replay_step_log(lines, CREATE_REQUEST)
    replayed_lines = [
        jsonio.dumps17({"request": jsonio.loads(line)["request"], "result": result})
        for line, result in zip(lines, replayed)
    ]

    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    (FIXTURE_DIR / "create.json").write_text(jsonio.dumps17(CREATE_REQUEST) + "\n")
    (FIXTURE_DIR / "steps.jsonl").write_text(recorded)
    (FIXTURE_DIR / "replayed.jsonl").write_text("\n".join(replayed_lines) + "\n")
    (FIXTURE_DIR / "state.json").write_text(jsonio.dumps17(session.state()) + "\n")
    print(f"wrote {len(lines)} steps to {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
