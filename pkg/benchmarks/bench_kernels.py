"""Time the compiled kernels against the NumPy fallback.

Usage::

    python benchmarks/bench_kernels.py            # full sizes
    python benchmarks/bench_kernels.py --quick    # a few seconds

Each row reports the best of ``--repeat`` runs per backend and the
speed-up of the compiled one. Results of the two backends are also
compared, so a row doubles as an agreement check.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from flipflow._kernels import _fallback
from flipflow.model import decompose, random_spd
from flipflow.rng import make_rng

try:
    from flipflow._kernels import _core
except ImportError:  # extension not built
    _core = None


def cases(n_modes, n_flips, n_grid):
    spec = decompose(random_spd(n_modes, 7))
    rng = make_rng(0)
    qm = rng.normal(size=n_modes) * 0.3
    pm = rng.normal(size=n_modes) * 0.3
    taus = rng.exponential(1.0, n_flips)
    forms = rng.normal(size=(n_modes + 2, 2 * n_modes, 2 * n_modes))
    qt, pt = rng.normal(size=n_modes), rng.normal(size=n_modes)
    w = np.ones(n_modes)
    om, be = spec.omega, spec.beta
    return {
        "pdmp_run": lambda k: k.pdmp_run(om, be, qm, pm, taus, 0.0, float(taus.sum()) - 1.0, forms),
        "chain_run": lambda k: k.chain_run(om, be, qm, pm, taus, 0, 1),
        "segment_gram": lambda k: [k.segment_gram(om, qm, pm, t) for t in taus[:2000]],
        "scan_modal_distance": lambda k: k.scan_modal_distance(qm, pm, om, qt, pt, w, w, 0.0, 0.01, n_grid),
        "scan_flip_delta": lambda k: k.scan_flip_delta(qm, pm, om, be, 0.0, 0.01, n_grid),
    }


def _flat(x):
    if isinstance(x, (list, tuple)):
        return np.concatenate([_flat(v) for v in x]) if x else np.zeros(0)
    return np.ravel(np.asarray(x, dtype=float))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="small sizes")
    ap.add_argument("--modes", type=int, default=3, help="number of modes N")
    ap.add_argument("--repeat", type=int, default=3, help="timing repeats per backend")
    args = ap.parse_args(argv)
    n_flips, n_grid = (4096, 20_000) if args.quick else (65_536, 200_000)
    backends = [("python", _fallback)] + ([("cython", _core)] if _core is not None else [])
    print(f"N = {args.modes}, flips = {n_flips}, grid = {n_grid}, backends: "
          + ", ".join(name for name, _ in backends))
    print(f"{'kernel':<22}" + "".join(f"{name + ' [s]':>14}" for name, _ in backends)
          + f"{'speed-up':>10}{'max |diff|':>13}")
    for label, fn in cases(args.modes, n_flips, n_grid).items():
        times, outs = [], []
        for _, kern in backends:
            outs.append(_flat(fn(kern)))
            times.append(min(timeit.repeat(lambda: fn(kern), number=1, repeat=args.repeat)))
        row = f"{label:<22}" + "".join(f"{t:>14.4f}" for t in times)
        if len(times) == 2:
            diff = float(np.max(np.abs(outs[0] - outs[1]))) if outs[0].size else 0.0
            row += f"{times[0] / times[1]:>9.1f}x{diff:>13.1e}"
        print(row, flush=True)


if __name__ == "__main__":
    main()
