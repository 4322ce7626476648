"""Regenerate golden.json by asking the primary CLI to score 100 patients.

Usage, from this directory with the icurisk package installed:

    python3 generate_golden.py

Patients are drawn around each axis range with 10% overshoot on both
sides, so a handful of values exercise the clamping path. Values travel
to the CLI through repr(), which round-trips float64 exactly, and the
same floats are stored in golden.json.
"""

import json
import subprocess
import sys

import numpy as np

N_PATIENTS = 100
SEED = 777


def main():
    with open("bundle.json") as fh:
        bundle = json.load(fh)
    names = bundle["feature_names"]
    axes = {a["name"]: a for a in bundle["horizons"]["7"]["nomogram"]["axes"]}

    rng = np.random.default_rng(SEED)
    records = []
    for _ in range(N_PATIENTS):
        patient = {}
        for nm in names:
            lo, hi = axes[nm]["lo"], axes[nm]["hi"]
            pad = 0.1 * (hi - lo)
            patient[nm] = float(rng.uniform(lo - pad, hi + pad))
        args = ["icurisk", "predict", "--bundle", "bundle.json"]
        for nm, value in patient.items():
            args += ["--value", f"{nm}={value!r}"]
        result = subprocess.run(args, capture_output=True, text=True, check=True)
        scored = json.loads(result.stdout)
        records.append(
            {
                "patient": patient,
                "probabilities": {h: scored[h]["probability"] for h in ("7", "14", "28")},
                "total_points": {h: scored[h]["total_points"] for h in ("7", "14", "28")},
                "clamped": scored["7"]["clamped"],
            }
        )

    with open("golden.json", "w") as fh:
        json.dump({"seed": SEED, "records": records}, fh, indent=1)
        fh.write("\n")
    n_clamped = sum(1 for r in records if r["clamped"])
    print(f"wrote {len(records)} records ({n_clamped} with clamped inputs)", file=sys.stderr)


if __name__ == "__main__":
    main()
