"""Run every sweep in configs/ and write one CSV per config into the output directory.

    python3 scripts/run_figures.py                 # desk scale, 20 reps
    python3 scripts/run_figures.py --paper -j 4    # 100 reps, four workers
    python3 scripts/run_figures.py fig2 fig6       # a subset
"""

import argparse
import logging
import sys
import time
from pathlib import Path

from bufferless import harness

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
log = logging.getLogger("run_figures")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("figures", nargs="*", help="config stems, default all")
    parser.add_argument("--paper", action="store_true", help="100 replications per point")
    parser.add_argument("--reps", type=int)
    parser.add_argument("-j", "--jobs", type=int, default=1)
    parser.add_argument("-o", "--outdir", type=Path, default=None)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    outdir = args.outdir or harness.default_output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    names = args.figures or sorted(p.stem for p in CONFIGS.glob("*.yaml"))
    for name in names:
        raw = harness.load_config(CONFIGS / f"{name}.yaml")
        if args.paper:
            raw["reps"] = harness.FULL_REPS
        if args.reps is not None:
            raw["reps"] = args.reps
        spec = harness.ExperimentSpec.from_mapping(raw)
        start = time.perf_counter()
        rows = harness.run_sweep(
            spec, jobs=args.jobs,
            progress=lambda i, v: log.info("%s: %s=%s", name, spec.swept, v))
        out = outdir / f"{name}.csv"
        with open(out, "w", newline="") as fh:
            harness.write_sweep_csv(rows, fh)
        log.info("%s: wrote %s in %.0fs", name, out, time.perf_counter() - start)
    return 0


if __name__ == "__main__":
    sys.exit(main())
