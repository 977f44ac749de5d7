"""The remote path: a real uvicorn server driven by the thin CLI client."""

import socket
import subprocess
import sys
import time

import httpx
import pytest
from click.testing import CliRunner

import bayesbound as bb
from bayesbound.cli import main


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def server_url():
    port = free_port()
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "uvicorn",
            "bayesbound.service.app:app",
            "--host", "127.0.0.1", "--port", str(port), "--log-level", "warning",
        ],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    url = f"http://127.0.0.1:{port}"
    try:
        deadline = time.monotonic() + 30
        while True:
            try:
                if httpx.get(f"{url}/health", timeout=1.0).status_code == 200:
                    break
            except httpx.HTTPError:
                pass
            if time.monotonic() > deadline:
                proc.terminate()
                pytest.skip("server did not come up")
            time.sleep(0.2)
        yield url
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_health_over_http(server_url):
    body = httpx.get(f"{server_url}/health").json()
    assert body["status"] == "ok"


def test_cli_against_remote_matches_in_process(server_url, tmp_path):
    path = tmp_path / "m.gcm"
    bb.save_model(bb.make_synthetic_model(2, 4, seed=1), path)
    runner = CliRunner()
    args = ["compute", str(path), "--tau", "1.0", "--seed", "9", "--threads", "1"]
    local = runner.invoke(main, args, catch_exceptions=False)
    remote = runner.invoke(
        main, ["--server", server_url] + args, catch_exceptions=False
    )
    assert local.exit_code == 0 and remote.exit_code == 0
    assert local.output == remote.output


def test_remote_error_mapping(server_url, tmp_path):
    path = tmp_path / "skew.gcm"
    bb.save_model(
        bb.GaussianClassModel.from_arrays([[0.0], [0.5]], [[1.0]], [0.99, 0.01]),
        path,
    )
    res = CliRunner().invoke(
        main,
        ["--server", server_url, "compute", str(path), "--max-levels", "2"],
    )
    assert res.exit_code == 3


def test_unreachable_server_is_input_error(tmp_path):
    path = tmp_path / "m.gcm"
    bb.save_model(bb.make_synthetic_model(2, 2, seed=2), path)
    res = CliRunner().invoke(
        main, ["--server", "http://127.0.0.1:9", "compute", str(path)]
    )
    assert res.exit_code == 2
