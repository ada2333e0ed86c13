#!/usr/bin/env python3
"""Validate every summary.json below a directory against the published schema."""
import json
import pathlib
import sys

import jsonschema


def main() -> int:
    if len(sys.argv) != 3:
        print("usage: validate_summaries.py SCHEMA RESULTS_DIR", file=sys.stderr)
        return 2
    schema = json.loads(pathlib.Path(sys.argv[1]).read_text())
    files = sorted(pathlib.Path(sys.argv[2]).rglob("summary.json"))
    if not files:
        print("no summary.json found", file=sys.stderr)
        return 1
    validator = jsonschema.Draft202012Validator(schema)
    bad = 0
    for f in files:
        errors = list(validator.iter_errors(json.loads(f.read_text())))
        for e in errors:
            print(f"{f}: {e.json_path}: {e.message}", file=sys.stderr)
        bad += bool(errors)
    print(f"{len(files) - bad}/{len(files)} summaries valid")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
