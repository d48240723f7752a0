#!/usr/bin/env python3
"""Smoke test for the aqkd_py extension module.

Builds the cdylib if needed, copies it next to this script under the
importable name, and exercises every exported function.

Usage: python3 python/smoke_test.py
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_and_stage() -> None:
    subprocess.run(
        ["cargo", "build", "-p", "aqkd-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    built = ROOT / "target" / "debug" / "libaqkd_py.so"
    staged = Path(__file__).resolve().parent / "aqkd_py.so"
    shutil.copy2(built, staged)


def main() -> int:
    build_and_stage()
    sys.path.insert(0, str(Path(__file__).resolve().parent))
    import aqkd_py

    # bit strings, one-time pad, repetition code
    pad = aqkd_py.Bits("1100")
    msg = aqkd_py.Bits("1010")
    cipher = aqkd_py.otp_encrypt(pad, msg)
    assert str(cipher) == "0110", str(cipher)
    assert str(aqkd_py.otp_encrypt(pad, cipher)) == str(msg)
    assert len(aqkd_py.Bits.random(128, 7)) == 128
    assert aqkd_py.Bits.random(128, 7) == aqkd_py.Bits.random(128, 7)
    code = aqkd_py.ecc_encode(aqkd_py.Bits("10"), 3)
    assert str(code) == "111000", str(code)
    assert str(aqkd_py.ecc_decode(aqkd_py.Bits("110001"), 3)) == "10"
    rt = aqkd_py.Bits.from_hex(cipher.hex(), len(cipher))
    assert rt == cipher

    # a small honest election, deterministic per seed
    scenario = json.dumps(
        {
            "name": "smoke",
            "seed": 11,
            "trials": 1,
            "s": 16,
            "m": 48,
            "n_voters": 3,
            "candidates": ["A", "B"],
            "ecc_r": 3,
            "enforce_candidate_gate": False,
        }
    )
    report1, transcript1 = aqkd_py.run_scenario(scenario)
    report2, transcript2 = aqkd_py.run_scenario(scenario)
    assert report1 == report2 and transcript1 == transcript2
    summary = json.loads(report1)["summary"]
    assert summary["completed"] == 1, summary
    assert summary["all_confirmed"] == 1, summary
    assert aqkd_py.verify_transcript(transcript1) == []

    # full interception is essentially always detected; no attacker, never
    detections, trials, rate, lower, upper = aqkd_py.detection_rate(
        48, 1.0, 200, 5
    )
    assert trials == 200 and rate > 0.99 and lower <= rate <= upper, rate
    assert aqkd_py.detection_rate(48, 0.0, 200, 5)[2] == 0.0

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
