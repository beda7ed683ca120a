#!/usr/bin/env python3
"""Solve an LP-format model with HiGHS and write `name value` lines.

Usage: milp_solve.py MODEL.lp OUT.txt [--time-limit SECONDS]

The first line of OUT.txt is a comment with the model status and objective.
Exit status: 0 optimal, 1 no optimal solution, 2 usage or read error.
"""

import argparse
import sys

import highspy


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("model")
    parser.add_argument("out")
    parser.add_argument("--time-limit", type=float, default=60.0)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("threads", args.threads)
    h.setOptionValue("mip_rel_gap", 0.0)
    if h.readModel(args.model) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.model}", file=sys.stderr)
        return 2
    h.run()
    status = h.getModelStatus()
    optimal = status == highspy.HighsModelStatus.kOptimal
    lp = h.getLp()
    info = h.getInfo()
    with open(args.out, "w") as out:
        out.write(f"# status {h.modelStatusToString(status)}"
                  f" objective {info.objective_function_value}\n")
        if info.primal_solution_status != 0:
            values = h.getSolution().col_value
            for name, value in zip(lp.col_names_, values):
                out.write(f"{name} {value!r}\n")
    return 0 if optimal else 1


if __name__ == "__main__":
    sys.exit(main())
