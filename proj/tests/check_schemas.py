"""Runs every CLI subcommand, validates each emitted JSON against schemas/, and checks bit-identical reruns."""

import json
import os
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
import referencing

cli, schema_dir = sys.argv[1], pathlib.Path(sys.argv[2])

resources = []
schemas = {}
for path in schema_dir.glob("*.json"):
    doc = json.loads(path.read_text())
    resources.append((doc["$id"], referencing.Resource.from_contents(doc)))
    schemas[path.stem] = doc
registry = referencing.Registry().with_resources(resources)

runs = {
    "eval": ["eval", "--s", "0.5", "--p", "2", "--m", "33", "--u", "cone", "--set", "u.beta=0.25"],
    "eval-profile": ["eval", "--s", "0.4", "--p", "1.5", "--method", "profile", "--u", "power-positive-part",
                     "--set", "u.beta=0.4"],
    "barrier": ["barrier-check", "--family", "cone", "--beta", "0.25", "--s", "0.5", "--p", "2"],
    "solve": ["solve", "--s", "0.6", "--p", "2", "--m", "65", "--g", "affine", "--f", "1"],
    "obstacle": ["solve", "--s", "0.6", "--p", "2", "--m", "65", "--set", "obstacle=above", "--g", "1"],
    "perron": ["perron", "--s", "0.75", "--p", "2", "--ms", "33,65", "--g", "affine"],
    "puncture": ["probe", "--experiment", "puncture", "--s_list", "0.75,0.25", "--p", "2", "--ms", "33,65,129"],
    "rhs": ["probe", "--experiment", "rhs-independence", "--s", "0.75", "--p", "2", "--ms", "33,65,129",
            "--configuration", "exterior-sphere"],
    "exterior": ["probe", "--experiment", "exterior", "--s", "0.4", "--p", "2", "--ms", "33,65,129",
                 "--configuration", "exterior-sphere", "--set", "x0=1.5"],
    "ring": ["probe", "--experiment", "barrier", "--s", "0.5", "--p", "2", "--set", "L=4", "--set", "xi0=1"],
    "constant-C": ["constants", "--name", "C", "--beta", "0.25", "--s", "0.5", "--p", "2"],
    "constant-N": ["constants", "--name", "N", "--s", "0.5", "--p", "2", "--n", "3"],
    "constant-ring": ["constants", "--name", "ring_delta", "--beta", "0.25", "--s", "0.5", "--p", "2"],
    "constant-cutoff": ["constants", "--name", "cutoff_margin", "--s", "0.5", "--p", "2"],
}

failures = 0
seen = set()
with tempfile.TemporaryDirectory() as tmp:
    def run(name, out):
        env = dict(os.environ, NONLOCAL_OUT=str(out))
        proc = subprocess.run([cli, *runs[name]], env=env, capture_output=True, text=True)
        return proc.returncode, proc.stderr

    for name in runs:
        out = pathlib.Path(tmp) / name
        code, err = run(name, out)
        if code != 0:
            print(f"FAIL {name}: exit {code} {err.strip()}")
            failures += 1
            continue
        for path in sorted(out.glob("*.json")):
            doc = json.loads(path.read_text())
            kind = "grid-function" if path.name.endswith(".csv.json") else doc.get("schema")
            if kind not in schemas:
                print(f"FAIL {name}/{path.name}: no schema '{kind}'")
                failures += 1
                continue
            errors = list(jsonschema.Draft202012Validator(schemas[kind], registry=registry).iter_errors(doc))
            for e in errors[:3]:
                print(f"FAIL {name}/{path.name}: {e.json_path}: {e.message}")
            failures += bool(errors)
            seen.add(kind)

    # identical config, fresh directory: data files must match byte for byte
    for name in ("solve", "perron", "barrier"):
        again = pathlib.Path(tmp) / (name + "-again")
        run(name, again)
        first = pathlib.Path(tmp) / name
        for path in sorted(first.iterdir()):
            if path.name == "run.log":
                continue
            if path.read_bytes() != (again / path.name).read_bytes():
                print(f"FAIL {name}/{path.name}: rerun differs")
                failures += 1

missing = set(schemas) - seen - {"common"}
for kind in sorted(missing):
    print(f"FAIL schema '{kind}' never exercised")
failures += len(missing)
print("schemas: " + ("ok" if failures == 0 else f"{failures} failure(s)"))
sys.exit(1 if failures else 0)
