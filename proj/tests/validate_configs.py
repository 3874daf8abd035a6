"""Validates every bundled config against configs/scenario.schema.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1])
schema = json.loads((root / "scenario.schema.json").read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)

bad = 0
for path in sorted(root.glob("*.json")):
    if path.name == "scenario.schema.json":
        continue
    errors = list(validator.iter_errors(json.loads(path.read_text())))
    for e in errors:
        print(f"{path.name}: {e.json_path}: {e.message}")
    bad += bool(errors)
    print(f"{'ok  ' if not errors else 'FAIL'} {path.name}")

# The schema must also reject what the CLI rejects.
rejected = [
    {"kind": "teleport"},
    {"kind": "toa", "state": {"type": "gaussian", "grid": {"k_min": 1, "k_max": 2, "n": 8}, "k0": 1, "spread": 0.1},
     "detector": {"sigma": 1, "delta": 0.1, "embedding": {"type": "inertial", "velocity": 0.1},
                  "degradation": {"type": "gaussian", "decay_time": 1}},
     "scan": {"tau": [0, 1], "q": 1}},
    {"suite": "paper-limits", "criteria": [12]},
]
for cfg in rejected:
    if validator.is_valid(cfg):
        print(f"FAIL schema accepts {json.dumps(cfg)[:60]}...")
        bad += 1
sys.exit(1 if bad else 0)
