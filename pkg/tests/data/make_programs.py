"""Regenerate the conic regression programs in ``programs/``.

Runs a few desk-profile trials, records every subproblem handed to the
solver, and keeps a fixed spread of active, passive and power programs.

    python3 tests/data/make_programs.py
"""

from pathlib import Path

import numpy as np

from irsnoma.conic import save_program
from irsnoma.harness import default_config, draw_trial_channels
from irsnoma.optimizer import SCAConfig, SystemModel, run_algorithm1
from irsnoma.optimizer import steps

OUT = Path(__file__).with_name("programs")
WANT = {"active": 7, "passive": 7, "power": 6}


def kind_of(prog) -> str:
    if "theta" in prog.blocks or "v" in prog.blocks:
        return "passive"
    if "p" in prog.blocks:
        return "power"
    return "active"


def main():
    captured = []
    real_solve = steps.solve

    def recording_solve(prog, opts):
        captured.append(prog)
        return real_solve(prog, opts)

    steps.solve = recording_solve
    cfg = default_config("desk")
    try:
        for seed in range(6):
            rng = np.random.default_rng(1000 + seed)
            ch = draw_trial_channels(cfg, rng)
            model = SystemModel.from_channels(ch, cfg.radio.sigma2, cfg.radio.p_max,
                                              cfg.radio.r_min, bits=cfg.radio.bits)
            try:
                run_algorithm1(model, SCAConfig(max_outer_iters=4), rng)
            except Exception as exc:  # noqa: BLE001 - generator keeps going
                print(f"seed {seed}: {exc}")
    finally:
        steps.solve = real_solve

    by_kind = {k: [] for k in WANT}
    for prog in captured:
        by_kind[kind_of(prog)].append(prog)
    OUT.mkdir(exist_ok=True)
    for old in OUT.glob("*.json"):
        old.unlink()
    for kind, n in WANT.items():
        pool = by_kind[kind]
        picks = np.linspace(0, len(pool) - 1, n).round().astype(int) if pool else []
        for i, j in enumerate(picks):
            save_program(pool[j], OUT / f"{kind}_{i:02d}.json")
    print({k: len(v) for k, v in by_kind.items()})


if __name__ == "__main__":
    main()
