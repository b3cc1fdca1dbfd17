"""Loopback oracle for the external-oracle tests.

Answers every ``{"x": [...]}`` line with ``{"y": [...]}`` holding the same
numbers. Modes (first argument): ``echo`` (default), ``sum`` (y = sum of x),
``halfplane`` (infeasible when x[1] > 0, else echo), ``garbage`` (replies with
a non-JSON line), ``die`` (exits after the first request), ``silent`` (never
answers).
"""

import json
import sys
import time


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "echo"
    for line in sys.stdin:
        x = json.loads(line)["x"]
        if mode == "die":
            return 1
        if mode == "silent":
            time.sleep(60)
            continue
        if mode == "garbage":
            reply = "this is not json"
        elif mode == "halfplane" and x[1] > 0:
            reply = json.dumps({"infeasible": True})
        elif mode == "sum":
            reply = json.dumps({"y": [sum(x)]})
        else:
            reply = json.dumps({"y": x})
        sys.stdout.write(reply + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
