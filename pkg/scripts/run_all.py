"""Run every config in scripts/configs and print one status line per experiment.

    python3 scripts/run_all.py [config ...]
"""

import sys
from pathlib import Path

from cloaksim.config import ConfigError, load_config
from cloaksim.experiments import ExperimentFailure, run_experiment
from cloaksim.gridsolver import SolverError

HERE = Path(__file__).resolve().parent


def main(paths):
    paths = [Path(p) for p in paths] or sorted((HERE / "configs").glob("*.json"))
    failed = 0
    for path in paths:
        try:
            cfg = load_config(path)
            summary, _ = run_experiment(cfg)
        except ConfigError as exc:
            print(f"{path.name:24s} config error: {exc}")
            failed += 1
            continue
        except (ExperimentFailure, SolverError) as exc:
            print(f"{path.name:24s} failed: {exc}")
            failed += 1
            continue
        keys = [k for k in summary if k not in ("experiment", "status")][:4]
        brief = ", ".join(f"{k}={summary[k]:.3g}" if isinstance(summary[k], float) else f"{k}={summary[k]}"
                          for k in keys)
        print(f"{path.name:24s} ok -> {cfg.output}  ({brief})")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
