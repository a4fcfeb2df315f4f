"""Simulator validation: explicit-solution run at sigma = 0 and the r_min study.

    python scripts/validation.py [--ceiling 5] [--json out.json]
"""

import argparse
import json
import sys
from dataclasses import replace

from blowup_lab.checks import check_simulate
from blowup_lab.config import ValidationConfig
from blowup_lab.simulator import rmin_sensitivity
from blowup_lab.study import BlowupConfig, setup_blowup


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ceiling", type=float, default=5.0,
                    help="gradient growth factor for the r_min comparison run")
    ap.add_argument("--json", help="write the results here")
    args = ap.parse_args(argv)

    checks = check_simulate(ValidationConfig())
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name:28s} {c.value:10.3e} {c.relation} "
              f"{c.bound:.1e}")

    cfg = BlowupConfig(grad_ceiling=args.ceiling, snapshots=4)
    su = setup_blowup(cfg)
    sens = rmin_sensitivity(replace(su.sim, snapshot_times=()), su.initial_on)
    print(f"r_min halved (local error tol {cfg.tol:.0e}):")
    for k, v in sens.items():
        print(f"  {k:10s} {v:10.3e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"checks": [c.to_dict() for c in checks], "rmin_sensitivity": sens}, fh,
                      indent=2)
    return 0 if all(c.passed for c in checks) else 1


if __name__ == "__main__":
    sys.exit(main())
