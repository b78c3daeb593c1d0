"""How reference quality carries over: projections of weak and strong references across tree sizes."""

import argparse
from pathlib import Path

import numpy as np

from refproxy import data, evaluation as ev, projection as pj, reference as rf, tree as tr
from refproxy.canonical import atomic_write_text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", default="diabetes")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--sizes", default="2,4,8,16,24,32")
    ap.add_argument("--out", default="results/reference_strength")
    args = ap.parse_args()
    ds = data.load_bundled(args.dataset)
    sizes = [int(s) for s in args.sizes.split(",")]
    refs = {"ensemble_3": lambda s: rf.EnsembleConfig(n_trees=3, bootstrap_seed=s),
            "ensemble_100": lambda s: rf.EnsembleConfig(n_trees=100, bootstrap_seed=s),
            "gp": lambda s: rf.GpConfig(seed=s)}
    rows = []
    for run in range(args.runs):
        seed = ev.derive_seed(0, run)
        train, test = data.split(ds, data.SplitSpec(0.75, seed))
        for name, make in refs.items():
            model = rf.fit_reference(train, make(seed))
            path = tr.prune_path(tr.grow(pj.make_global_targets(model, train)))
            ref_err = ev.rmse(model.predict_summary(test.features).means, test.target)
            for b in sizes:
                err = ev.rmse(tr.predict(tr.pick_size(path, b)[0], test.features), test.target)
                rows.append({"run": run, "reference": name, "size": b, "rmse": err, "reference_rmse": ref_err})
    atomic_write_text(Path(args.out) / "reference_strength.csv", ev.rows_to_csv(rows))
    for name in refs:
        means = [np.mean([r["rmse"] for r in rows if r["reference"] == name and r["size"] == b]) for b in sizes]
        print(f"{name:13s}", " ".join(f"{m:7.2f}" for m in means))


if __name__ == "__main__":
    main()
