"""The command-line surface, end to end in a temporary directory.

synth -> train -> predict -> interpret, exactly as one would run them in a
shell.  Every artifact is deterministic: rerunning this script reproduces
byte-identical CSVs and archive.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

workdir = Path(tempfile.mkdtemp(prefix="fusemble_cli_"))
print(f"working in {workdir}\n")


def run(*args):
    cmd = [sys.executable, "-m", "fusemble", *args]
    print("$ fusemble " + " ".join(args))
    result = subprocess.run(cmd, capture_output=True, text=True)
    sys.stdout.write(result.stdout)
    sys.stderr.write(result.stderr)
    assert result.returncode == 0, f"exit code {result.returncode}"
    print()


# 1. synthesize a dataset + manifest
synth_spec = workdir / "synth.json"
synth_spec.write_text(json.dumps({
    "n": 120,
    "modalities": [
        {"n_features": 4, "n_informative": 2, "noise_std": 0.5},
        {"n_features": 3, "n_informative": 1, "noise_std": 0.5},
    ],
    "complementarity": 1.0,
    "seed": 9,
}, indent=2))
run("synth", "--spec", str(synth_spec), "--out-dir", str(workdir / "data"))

# 2. train: nested-CV evaluation + final model archive
config = workdir / "config.json"
config.write_text(json.dumps({
    "manifest": str(workdir / "data" / "manifest.json"),
    "cv": {"k_outer": 3, "k_inner": 2, "seed": 1},
    "out_dir": str(workdir / "run"),
}, indent=2))
run("train", "--config", str(config), "--workers", "2")

# 3. predict with the archived model (defaults to the best-AUC ensemble)
run("predict", "--model", str(workdir / "run" / "model.json"),
    "--manifest", str(workdir / "data" / "manifest.json"),
    "--out-dir", str(workdir / "predictions"))

# 4. rank features of the archived model
run("interpret", "--model", str(workdir / "run" / "model.json"),
    "--manifest", str(workdir / "data" / "manifest.json"),
    "--n-repeats", "5", "--seed", "0",
    "--out-dir", str(workdir / "interpretation"))

print("artifacts:")
for path in sorted(workdir.rglob("*.csv")):
    print(f"  {path.relative_to(workdir)}")
print(f"  run/model.json ({(workdir / 'run' / 'model.json').stat().st_size} bytes)")
