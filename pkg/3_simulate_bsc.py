from noisyperm.cli import main
from pathlib import Path
import argparse

parser = argparse.ArgumentParser(
    prog="SimulateBsc",
    description="Monte Carlo error rates with ML decoding next to the achievability bound",
)
parser.add_argument("-d", "--delta", type=float, help="BSC crossover probability", default=0.11)
parser.add_argument("-n", "--blocklengths", nargs="+", type=int, help="Blocklengths to simulate", default=[50, 100, 200])
parser.add_argument("-m", "--messages", type=int, help="Number of messages", default=3)
parser.add_argument("-t", "--trials", type=int, help="Trials per blocklength", default=100_000)
parser.add_argument("-s", "--seed", type=int, help="RNG seed", default=7)
parser.add_argument("-w", "--workers", type=int, help="Threads running trial blocks", default=4)
parser.add_argument("-o", "--out-dir", type=str, help="Directory for the JSON reports", default="results")
args = parser.parse_args()

out_dir = Path(args.out_dir)
out_dir.mkdir(parents=True, exist_ok=True)

status = 0
for n in args.blocklengths:
    out = out_dir / f"sim_delta{args.delta:g}_n{n}_m{args.messages}.json"
    print(f"Processing n={n} ({args.trials} trials) -> {out}")
    code = main([
        "simulate", "bsc", "--delta", str(args.delta), "--n", str(n), "--m", str(args.messages),
        "--trials", str(args.trials), "--seed", str(args.seed), "--workers", str(args.workers),
        "--invariance", "--output", str(out),
    ])
    status = max(status, code)
print("Done!")
raise SystemExit(status)
