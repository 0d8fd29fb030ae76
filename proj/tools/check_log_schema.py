#!/usr/bin/env python3
"""Validate a JSON-lines prediction log against the published JSON Schema."""
import json
import sys

import jsonschema


def main() -> int:
    if len(sys.argv) != 3:
        print("usage: check_log_schema.py SCHEMA LOG", file=sys.stderr)
        return 2
    with open(sys.argv[1], encoding="utf-8") as f:
        schema = json.load(f)
    validator = jsonschema.Draft202012Validator(schema)
    bad = 0
    lines = 0
    with open(sys.argv[2], encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            if not line.strip():
                continue
            lines += 1
            for err in validator.iter_errors(json.loads(line)):
                bad += 1
                print(f"line {n}: {err.message}", file=sys.stderr)
    if lines == 0:
        print("empty log", file=sys.stderr)
        return 1
    print(f"{lines} records, {bad} schema errors")
    return 0 if bad == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
