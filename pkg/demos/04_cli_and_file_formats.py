"""Drive the command-line pipeline end to end in a scratch directory and peek
at every file format it reads and writes.

Run:  python3 demos/04_cli_and_file_formats.py    (about a minute)
"""

import tempfile
from pathlib import Path

from tensorfen import fileio
from tensorfen.cli import main
from tensorfen.simulate import six_mask

work = Path(tempfile.mkdtemp(prefix="tensorfen-demo-"))
print(f"working in {work}\n")

# --- masks ------------------------------------------------------------------
# a mask file: header "P1 P2", then P1 rows of values in [0, 1]; 0 = inactive
mask_path = work / "six.txt"
fileio.write_mask_file(mask_path, six_mask())
print("mask file head:")
print("\n".join(mask_path.read_text().splitlines()[:4]), "\n...")

# --- simulate ---------------------------------------------------------------
code = main([
    "simulate", "--setting", "2", "--n", "240", "--seed", "7",
    "--out", str(work / "data"), "--n-test", "120",
])
assert code == 0
header = (work / "data" / "x.txt").read_text().splitlines()[0]
print(f"\nsimulated: x header '{header}' "
      f"(+ y.txt, x_test.txt, y_test.txt, truth.json)")

# --- tune + fit -------------------------------------------------------------
# grids and chain lengths come from a flat key=value file
grids = work / "grids.txt"
grids.write_text(
    "p0_mult = 0.5 5\n"
    "r = 1 0\n"
    "rho = 0.5 5\n"
    "total_iters = 1500\n"
    "burn_in = 750\n"
    "warmstart_offset = 150\n"
)
code = main([
    "tune-fit", "--x", str(work / "data" / "x.txt"),
    "--y", str(work / "data" / "y.txt"),
    "--grids-file", str(grids), "--seed", "3",
    "--out", str(work / "fit"), "--cold-start",
])
assert code == 0
print("\ntune-fit summary:")
print((work / "fit" / "summary.txt").read_text())

# --- report -----------------------------------------------------------------
code = main([
    "report", "--fit", str(work / "fit" / "fit.json"),
    "--truth", str(work / "data" / "truth.json"),
    "--test-x", str(work / "data" / "x_test.txt"),
    "--test-y", str(work / "data" / "y_test.txt"),
    "--out", str(work / "report"),
])
assert code == 0
print("report metrics:")
print((work / "report" / "metrics.txt").read_text())
print(f"all artifacts under {work}")
