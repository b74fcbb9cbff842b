#!/usr/bin/env python3
"""IDE-friendly script to run convlim.

This script can be run directly from IDEs like VS Code or PyCharm.
Provides a configuration section for the description file, the suites to
run and the output paths.
"""
import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent.resolve()
sys.path.insert(0, str(project_root))

from convlim.run_convlim import main as cli_main

# ============================================================================
# CONFIGURATION - Edit these paths as needed
# ============================================================================

# System description to verify
DESCRIPTION = project_root / "fixtures" / "fixture_a.json"

# Suite selector: "all", one suite name or a comma list (e.g. "partitions,cpps")
SUITE = "all"

# Output files (will be created if they don't exist)
REPORT_JSON = project_root / "output" / "report.json"
TRAJECTORY_CSV = project_root / "output" / "trajectory.csv"

# Sampling: window labels, number of threads and seed
SAMPLE_FROM = "0"
SAMPLE_TO = "3"
SAMPLE_N = 1000
SAMPLE_SEED = 7

# Also run the mutation catalogue
RUN_MUTATIONS = True

# ============================================================================
# MAIN EXECUTION
# ============================================================================

def main():
    """Verify the configured description, sample it and run the mutants.

    Returns:
        Exit code: 0 on success, 1 on failed checks, 2 on bad input.
    """
    print("=" * 70)
    print("convlim verification run")
    print("=" * 70)
    print(f"Description: {DESCRIPTION}")
    print(f"Suite: {SUITE}")
    print(f"Report JSON: {REPORT_JSON}")
    print(f"Trajectory CSV: {TRAJECTORY_CSV}")
    print("=" * 70)
    print()

    code = cli_main(["verify", str(DESCRIPTION), "--suite", SUITE, "--json", str(REPORT_JSON)])
    if code == 2:
        return code

    print()
    sample_code = cli_main([
        "sample", str(DESCRIPTION),
        "--from", SAMPLE_FROM, "--to", SAMPLE_TO,
        "-n", str(SAMPLE_N), "--seed", str(SAMPLE_SEED),
        "--out", str(TRAJECTORY_CSV),
    ])
    code = max(code, sample_code)

    if RUN_MUTATIONS:
        print()
        code = max(code, cli_main(["mutate", str(DESCRIPTION)]))

    print()
    print("=" * 70)
    print("All checks passed" if code == 0 else f"Finished with exit code {code}")
    print("=" * 70)
    return code


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        sys.exit(130)
