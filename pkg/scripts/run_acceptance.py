"""Run acceptance criteria and write one JSON line per criterion.

Usage::

    python scripts/run_acceptance.py [--suite all] [--output results.jsonl]
"""
import argparse
import sys

from minmetric.serialize import dumps
from minmetric.verify import run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--suite", default="all")
    ap.add_argument("--output", default="acceptance.jsonl")
    args = ap.parse_args()
    failed = 0
    with open(args.output, "w", encoding="utf-8") as fh:
        for r in run_suite(args.suite):
            print(f"{r.line()}  {r.seconds:7.1f} s", flush=True)
            fh.write(dumps(r.to_dict(timing=True)) + "\n")
            failed += not r.passed
    print(f"{failed} failed" if failed else "all passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
