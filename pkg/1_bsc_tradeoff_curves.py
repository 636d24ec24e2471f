from noisyperm.cli import main
from pathlib import Path
import argparse

parser = argparse.ArgumentParser(
    prog="BscTradeoffCurves",
    description="Rate-blocklength curves for the BSC: achievability bound against its Gaussian approximations",
)
parser.add_argument("-d", "--deltas", nargs="+", type=float, help="BSC crossover probabilities", default=[0.11, 0.22])
parser.add_argument("-e", "--eps", nargs="+", type=float, help="Target error probabilities", default=[1e-3, 1e-6])
parser.add_argument("-g", "--n-grid", type=str, help="Blocklength grid", default="logspace:20:2000:30")
parser.add_argument("-w", "--workers", type=int, help="Threads evaluating blocklengths", default=4)
parser.add_argument("-o", "--out-dir", type=str, help="Directory for the CSV and PNG files", default="results")
args = parser.parse_args()

METHODS = "THM3_BSC,APPROX_BSC,APPROX_BSC_CEIL"

out_dir = Path(args.out_dir)
out_dir.mkdir(parents=True, exist_ok=True)

# One figure per (crossover, target) pair
status = 0
for delta in args.deltas:
    for eps in args.eps:
        stem = out_dir / f"bsc_delta{delta:g}_eps{eps:g}"
        print(f"Processing delta={delta:g}, eps={eps:g} -> {stem}.csv")
        code = main([
            "curve", "bsc", "--delta", str(delta), "--eps", repr(eps),
            "--n-grid", args.n_grid, "--methods", METHODS, "--workers", str(args.workers),
            "--output", f"{stem}.csv", "--plot", f"{stem}.png",
            "--title", f"BSC({delta:g}), eps = {eps:g}",
        ])
        status = max(status, code)
print("Done!")
raise SystemExit(status)
