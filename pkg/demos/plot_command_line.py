"""
Running experiments from the command line
=========================================

The ``racingts`` entry point writes the per-step table, a metadata file and
mean regret curves, then prints a summary. Here it is driven in-process.
"""

import os
import tempfile

from racingts.cli import main

out = os.path.join(tempfile.mkdtemp(), "run.csv")
main(["--experiment", "sensitivity", "--replications", "2", "--horizon", "100",
      "--arms", "4", "--agents", "racing:delta=0.1:sigma=0.1,racing:delta=0.7:sigma=0.7",
      "--out", out])
print(sorted(os.listdir(os.path.dirname(out))))
with open(out) as fh:
    print("".join(fh.readlines()[:4]))
