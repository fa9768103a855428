#!/usr/bin/env python3
"""Run every preset scenario at reference resolution into out/<scenario>/.

Each cell writes its CSV artifacts plus a manifest with the in-run assertion
results; the script echoes the per-scenario exit status and finishes nonzero
if any cell failed its checks.
"""

import sys
from pathlib import Path

from extheat.cli import PRESETS, build_config, run_scenario, serialize_config


def main() -> int:
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")
    worst = 0
    for name in PRESETS:
        cfg = build_config(name)
        out = out_root / name
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.cfg").write_text(serialize_config(cfg), encoding="utf-8")
        result = run_scenario(cfg, out, quiet=True)
        status = "ok" if result.exit_code == 0 else "FAILED CHECKS"
        print(f"{name}: {status}")
        for check, ok, detail in result.checks:
            print(f"    {'PASS' if ok else 'FAIL'} {check}: {detail}")
        worst = max(worst, result.exit_code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
