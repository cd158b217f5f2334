"""The curation engine must complete a full run against a live sidecar.

The engine is exercised strictly through its public surfaces: the CLI and
the HTTP wire protocol. Requires the ``curagen`` package to be installed.
"""
from __future__ import annotations

import json
import socket
import subprocess
import sys
import threading
import time

import pytest
import requests
import uvicorn

from curagen_sidecar.app import SidecarConfig, create_app


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def live_sidecar():
    port = _free_port()
    app = create_app(SidecarConfig(model="hash:64", max_batch=256, port=port))
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            if requests.get(f"{url}/healthz", timeout=1).status_code == 200:
                break
        except requests.RequestException:
            time.sleep(0.05)
    else:
        pytest.fail("sidecar did not become healthy")
    yield url
    server.should_exit = True
    thread.join(timeout=5)


def test_engine_run_completes_against_sidecar(live_sidecar, tmp_path):
    rows = []
    for g in range(2):
        shared = " ".join(f"group{g}word{j}" for j in range(8))
        for i in range(50):
            rows.append(
                {
                    "id": f"g{g}r{i:03d}",
                    "instruction": f"{shared} unique{g}x{i}",
                    "answer": f"label {i % 5}",
                }
            )
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text("".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8")
    out = tmp_path / "out"

    completed = subprocess.run(
        [
            sys.executable,
            "-m",
            "curagen.cli",
            "run",
            "--corpus", str(corpus),
            "--seed", "5",
            "--output-dir", str(out),
            "--cluster-provider", f"remote:url={live_sidecar}",
            "--score-provider", f"remote:url={live_sidecar}",
            "--k-min", "2",
            "--k-max", "4",
            "--batch-size", "64",
            "--iterations", "40",
            "--n-init", "4",
            "--variants", "3",
            "--n", "1",
            "--quota", "10",
        ],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert completed.returncode == 0, completed.stderr

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["method"] == "generalization-topk"
    assert manifest["total"] == sum(
        min(10, len(group["selected"])) for group in manifest["per_cluster"]
    )
    assert manifest["total"] > 0
    scores = [json.loads(line) for line in (out / "scores.jsonl").read_text().splitlines()]
    assert len(scores) == 100
