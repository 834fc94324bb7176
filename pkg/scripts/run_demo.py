#!/usr/bin/env python3
"""End-to-end walkthrough on generated fixtures: conflate an entity,
start a ledger node, post the entity CSV, mine, and resync.

    python3 scripts/run_demo.py [--difficulty 3] [--keep-dir DIR]
"""
import argparse
import json
import socket
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import requests

REPO = Path(__file__).resolve().parent.parent


def free_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def wait_until_up(url, timeout=15.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            requests.get(f"{url}/chain", timeout=1)
            return
        except requests.RequestException:
            time.sleep(0.1)
    raise RuntimeError(f"node at {url} did not come up")


def run(cmd, **kwargs):
    print("$", " ".join(str(c) for c in cmd))
    subprocess.run([str(c) for c in cmd], check=True, **kwargs)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--difficulty", type=int, default=3)
    parser.add_argument("--keep-dir", default=None, help="work dir to keep (default: temp)")
    args = parser.parse_args()

    work = Path(args.keep_dir) if args.keep_dir else Path(tempfile.mkdtemp(prefix="conflate-demo-"))
    work.mkdir(parents=True, exist_ok=True)
    data = work / "data"

    run([sys.executable, REPO / "scripts" / "make_snapshots.py",
         "--out-dir", data, "--seed", "7"])

    snapshots = sorted(data.glob("*.json"))
    first_entity = json.loads(snapshots[0].read_text())["entities"][0]
    entity_csv = work / "entity.csv"
    run([sys.executable, "-m", "conflate.cli", "compute",
         "--kind", first_entity["kind"], "--id", first_entity["id"],
         *sum([["--sources", s] for s in snapshots], []),
         "--out", entity_csv])

    port = free_port()
    url = f"http://127.0.0.1:{port}"
    node = subprocess.Popen(
        [sys.executable, "-m", "conflate.cli", "serve",
         "--port", str(port), "--difficulty", str(args.difficulty),
         "--persist", str(work / "chain.jsonl")],
    )
    try:
        wait_until_up(url)
        run([sys.executable, "-m", "conflate.cli", "post", entity_csv, "--node-url", url])
        run([sys.executable, "-m", "conflate.cli", "mine", "--node-url", url])
        run([sys.executable, "-m", "conflate.cli", "resync", "--node-url", url])
        chain = requests.get(f"{url}/chain", timeout=5).json()
        print(f"chain length {chain['length']}, tip hash {chain['blocks'][-1]['hash']}")
    finally:
        node.terminate()
        node.wait(timeout=10)
    print(f"artifacts in {work}")


if __name__ == "__main__":
    main()
