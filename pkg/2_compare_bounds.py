from noisyperm.cli import main
from pathlib import Path
import argparse

parser = argparse.ArgumentParser(
    prog="CompareBounds",
    description="Scale check of the general grid bound against the binary closed form on the same BSC",
)
parser.add_argument("-d", "--delta", type=float, help="BSC crossover probability", default=0.11)
parser.add_argument("-e", "--eps", type=float, help="Target error probability", default=1e-3)
parser.add_argument("-g", "--n-grid", type=str, help="Blocklength grid", default="logspace:20:1000:12")
parser.add_argument("-w", "--workers", type=int, help="Threads evaluating blocklengths", default=4)
parser.add_argument("-o", "--out-dir", type=str, help="Directory for the CSV and PNG files", default="results")
args = parser.parse_args()

out_dir = Path(args.out_dir)
out_dir.mkdir(parents=True, exist_ok=True)
stem = out_dir / f"compare_delta{args.delta:g}_eps{args.eps:g}"

print(f"Processing grid bound vs binary bound -> {stem}.csv")
status = main([
    "curve", "bsc", "--delta", str(args.delta), "--eps", repr(args.eps),
    "--n-grid", args.n_grid, "--methods", "THM2_EXACT,THM3_BSC,APPROX_GENERAL",
    "--workers", str(args.workers), "--output", f"{stem}.csv", "--plot", f"{stem}.png",
    "--title", f"Bound comparison, BSC({args.delta:g})",
])
print("Done!")
raise SystemExit(status)
