"""Write the E(L)-versus-load curves of both systems to CSV."""
import argparse
import csv
import sys

import numpy as np

from vacation_qbd.analysis import default_rho_grid, sweep_rho


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--upper", type=float, default=0.1)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--output", "-o", default="-")
    args = p.parse_args()
    rows = sweep_rho(0.99, 0.98, 0.1, 100.0, default_rho_grid(args.step, args.upper), args.workers)
    fh = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["rho", "el_vacation", "el_vacation_exact", "el_mm1"])
    for r in rows:
        w.writerow([f"{v:.17g}" if v is not None else "" for v in
                    (r.rho, r.el_vacation, r.el_vacation_exact, r.el_mm1)])
    diffs = np.array([r.difference for r in rows if r.difference is not None])
    changes = int(np.sum(np.sign(diffs[:-1]) != np.sign(diffs[1:])))
    print(f"{len(rows)} loads, {changes} sign change(s) of el_vacation - el_mm1", file=sys.stderr)


if __name__ == "__main__":
    main()
