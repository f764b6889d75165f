"""Small argument sets that exercise every subcommand quickly."""

import json
from pathlib import Path

from floodchain.cli import main

SIM = ["--n-chains", "4", "--chain-len", "800", "--burn-in", "50"]


def subcommand_args(data: Path, stations: list, model_json: Path) -> dict:
    d, m = str(data), str(model_json)
    return {
        "fit": ["fit", "--input", d, "--threshold", "10", "--family", "log", "--seed", "1"],
        "simulate": ["simulate", "--model", m, "--seed", "2", *SIM],
        "theta": ["theta", "--model", m, "--seed", "3", *SIM],
        "theta-intervals": ["theta", "--input", d, "--threshold", "10", "--method", "intervals"],
        "quantile": ["quantile", "--model", m, "--seed", "4", *SIM],
        "quantile-pot": ["quantile", "--input", d, "--threshold", "10", "--method", "pot", "--estimator", "pwu"],
        "diagnose": ["diagnose", "--input", d, "--n-boot", "100", "--omegas", "0.9,0.95", "--seed", "5"],
        "evaluate": [
            "evaluate", "--stations", ",".join(map(str, stations)), "--threshold", "10", "--window-years", "5",
            "--families", "log", "--periods", "10", "--seed", "6", *SIM,
        ],
        "duration": ["duration", "--input", d, "--model", m, "--seed", "7", *SIM],
    }


def run(args, out: Path) -> int:
    return main([*args, "--output", str(out)])


def read_outputs(out: Path) -> dict:
    """Every output file's bytes; the manifest without its timing entry."""
    files = {}
    for p in sorted(out.iterdir()):
        if p.name == "manifest.json":
            man = json.loads(p.read_text())
            man.pop("wall_time_s")
            files[p.name] = json.dumps(man, sort_keys=True).encode()
        else:
            files[p.name] = p.read_bytes()
    return files
