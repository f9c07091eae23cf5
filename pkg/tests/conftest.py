import json
from pathlib import Path

import pytest

from saucebot import benchmark, cli, dataset, neuralnet

SAMPLE_DRAWING = Path(__file__).resolve().parents[1] / "src" / "saucebot" / "data" / "sample_drawing.json"


def run_pipeline(root: Path, seed: int = 42) -> dict:
    """gen-data, train all four models, benchmark, draw; returns output paths."""
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "data": root / "data.jsonl",
        "models": root / "models",
        "report": root / "report.json",
        "svg": root / "draw.svg",
    }
    s = str(seed)
    assert cli.main(["gen-data", "--seed", s, "--out", str(paths["data"])]) == 0
    assert cli.main(["train", str(paths["data"]), "--seed", s, "--out", str(paths["models"])]) == 0
    assert cli.main(["benchmark", "--models", str(paths["models"]), "--seed", s, "--out", str(paths["report"])]) == 0
    assert cli.main(["draw", str(SAMPLE_DRAWING), "--models", str(paths["models"]), "--seed", s,
                     "--out", str(paths["svg"])]) == 0
    return paths


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("run_a"))


@pytest.fixture(scope="session")
def artifacts_repeat(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("run_b"))


@pytest.fixture(scope="session")
def report(artifacts):
    return json.loads(artifacts["report"].read_text())


@pytest.fixture(scope="session")
def rows(artifacts):
    return dataset.read_jsonl(artifacts["data"])[1]


@pytest.fixture(scope="session")
def models(artifacts):
    return benchmark.load_models(artifacts["models"])


@pytest.fixture(scope="session")
def flow_model(artifacts):
    return neuralnet.load_model(artifacts["models"] / "flow.json")


ACCEPTANCE_LINES: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail}")
    print(ACCEPTANCE_LINES[-1])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
