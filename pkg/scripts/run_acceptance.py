#!/usr/bin/env python3
"""Run the acceptance criteria and print one PASS/FAIL line per criterion."""

import argparse
import json
import sys

from yamabe_blowup.acceptance import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true", help="reduced resolution")
    ap.add_argument("--only", default="", help="comma-separated criterion numbers")
    ap.add_argument("--json", help="write a machine-readable summary here")
    args = ap.parse_args()
    select = {int(k) for k in args.only.split(",") if k.strip()} or None
    results = run_all(quick=args.quick, select=select, log=print)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({str(c.number): c.as_dict() for c in results}, fh, indent=2, sort_keys=True)
    return 0 if all(c.passed for c in results) else 1


if __name__ == "__main__":
    sys.exit(main())
