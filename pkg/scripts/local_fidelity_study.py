"""Local fidelity of projected local trees vs same-size trees fit to nearby training rows."""

import argparse
from pathlib import Path

import numpy as np

from refproxy import data, evaluation as ev, reference as rf
from refproxy.canonical import atomic_write_text
from refproxy.projection import NeighborhoodSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", default="diabetes")
    ap.add_argument("--reference", default="gp", choices=["gp", "ensemble"])
    ap.add_argument("--train-fraction", type=float, default=0.9)
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--size", type=int, default=None, help="fixed leaf count; omit for CV")
    ap.add_argument("--out", default="results/local_fidelity")
    args = ap.parse_args()
    ds = data.load_bundled(args.dataset)
    train, test = data.split(ds, data.SplitSpec(args.train_fraction, 0))
    cfg = rf.GpConfig() if args.reference == "gp" else rf.EnsembleConfig(n_trees=50)
    model = rf.fit_reference(train, cfg)
    nb = NeighborhoodSpec(np.zeros(ds.d), 1.0, args.samples, 0)
    cmp = ev.compare_local_fidelity(model, train, test.features, nb, args.size)
    rows = [{"row": i, "utility": u, "direct": d, "size": int(b), "features_used": int(k)}
            for i, (u, d, b, k) in enumerate(zip(cmp.utility, cmp.direct, cmp.sizes, cmp.n_features_used))]
    atomic_write_text(Path(args.out) / "local_fidelity.csv", ev.rows_to_csv(rows))
    diff, lo, hi = ev.paired_bootstrap_ci(cmp.direct, cmp.utility)
    print(f"utility {cmp.utility.mean():.2f}  direct {cmp.direct.mean():.2f}  "
          f"direct-utility {diff:.2f} [{lo:.2f}, {hi:.2f}]  "
          f"mean size {cmp.sizes.mean():.2f}, features {cmp.n_features_used.mean():.2f}")


if __name__ == "__main__":
    main()
