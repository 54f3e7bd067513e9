#!/usr/bin/env python3
"""Recompute sync-validation outcomes from first principles.

The physics clock runs at rho of wall speed; the network waits N * delay of
wall time. A packet sent at sim time s is therefore handed back at sim time
s + rho * N * d. Synchronized runs deliver at s + d when the hand-off is not
late and discard otherwise; unsynchronized runs deliver at the hand-off.
Every row of both packet.csv files is checked against that.

usage: two_clock_check.py COSIM_BINARY SCENARIO_JSON
"""

import csv
import json
import pathlib
import subprocess
import sys
import tempfile
from fractions import Fraction


def duration_ns(text):
    if isinstance(text, (int, float)):
        return int(Fraction(str(text)) * 10**9)
    for suffix, scale in (("ns", 1), ("us", 10**3), ("ms", 10**6), ("s", 10**9)):
        if text.endswith(suffix):
            return int(Fraction(text[: -len(suffix)]) * scale)
    raise ValueError(text)


def main():
    binary, scenario_path = sys.argv[1], sys.argv[2]
    scenario = json.loads(pathlib.Path(scenario_path).read_text())
    scenario.setdefault("sync", {})["emulate_stall"] = False
    sync = scenario["sync"]
    rho = Fraction(str(sync.get("real_time_factor", 1.0)))
    n = int(sync.get("time_scale", 1))
    d = duration_ns(scenario["sync_validation"]["net_delay"])
    packets = int(scenario["sync_validation"].get("packets", 100))

    with tempfile.TemporaryDirectory() as tmp:
        cfg = pathlib.Path(tmp) / "scenario.json"
        cfg.write_text(json.dumps(scenario))
        out = pathlib.Path(tmp) / "out"
        subprocess.run([binary, "sync-validate", str(cfg), "--out", str(out)],
                       check=True, stdout=subprocess.DEVNULL)

        failures = 0
        for mode in ("synchronized", "unsynchronized"):
            rows = list(csv.DictReader(open(out / mode / "packet.csv")))
            if len(rows) != packets:
                print(f"{mode}: expected {packets} rows, got {len(rows)}")
                failures += 1
            for row in rows:
                sent = int(row["sent_ns"])
                handoff = sent + rho * n * d
                if mode == "unsynchronized":
                    expect = ("delivered", handoff)
                elif handoff <= sent + d:
                    expect = ("delivered", Fraction(sent + d))
                else:
                    expect = ("discarded", handoff)
                got = (row["event"], int(row["t_ns"]))
                if got[0] != expect[0] or abs(got[1] - expect[1]) > 1:
                    print(f"{mode} packet {row['packet_id']}: got {got}, expected "
                          f"({expect[0]}, {float(expect[1]):.0f})")
                    failures += 1
        print(f"rho={rho} N={n} delay={d}ns: {'ok' if failures == 0 else f'{failures} mismatches'}")
        return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
