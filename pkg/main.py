"""
Latent graph layer toolkit — Entry Point

Usage:
    pip install -r requirements.txt
    python main.py verify --trials 200
    python main.py bench --out bench.csv
    python main.py flops --c 1024 --cr 256 --d 100
    python main.py train --preset beacon-toy --variant +latentgnn --out loss.csv
"""

import os
import sys

# BLAS pools pinned to one thread unless the caller says otherwise; must precede the numpy import
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, os.environ.get("BENCH_THREADS", "1"))

from harness.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
