#!/usr/bin/env python3
"""Run the CLI over one parameter of a base configuration and collect the summaries.

A sweep file names a base config, a dotted parameter path, the values to try and
optional fixed overrides. Each variant gets its own artifact directory and the
summary rows are concatenated into sweep.csv.
"""

import argparse
import csv
import json
import re
import subprocess
import sys
from pathlib import Path


def load_commented_json(path):
    text = Path(path).read_text(encoding="utf-8")
    return json.loads(re.sub(r"^\s*//.*$", "", text, flags=re.MULTILINE))


def assign(config, dotted, value):
    node = config
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("sweep", type=Path)
    parser.add_argument("--cli", default="build/tools/dualstop", help="path to the dualstop executable")
    parser.add_argument("--out", type=Path, default=Path("runs/sweeps"))
    parser.add_argument("--threads", type=int, default=0)
    parser.add_argument("--dry-run", action="store_true")
    args = parser.parse_args()

    sweep = json.loads(args.sweep.read_text(encoding="utf-8"))
    base = load_commented_json(args.sweep.parent / sweep["base"])
    for key, value in sweep.get("overrides", {}).items():
        assign(base, key, value)

    root = args.out / args.sweep.stem
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for index, value in enumerate(sweep["values"]):
        config = json.loads(json.dumps(base))
        assign(config, sweep["parameter"], value)
        variant = root / f"{index:02d}"
        variant.mkdir(exist_ok=True)
        config_path = variant / "config.json"
        config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
        command = [args.cli, "run", "--config", str(config_path), "--out", str(variant / "artifacts"),
                   "--threads", str(args.threads)]
        if args.dry_run:
            command.append("--dry-run")
        print(f"[{index + 1}/{len(sweep['values'])}] {sweep['parameter']} = {json.dumps(value)}", flush=True)
        subprocess.run(command, check=True)
        if args.dry_run:
            continue
        with open(variant / "artifacts" / "summary.csv", newline="", encoding="utf-8") as handle:
            for row in csv.DictReader(handle):
                rows.append({"parameter": sweep["parameter"], "value": json.dumps(value), **row})

    if rows:
        with open(root / "sweep.csv", "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {root / 'sweep.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
