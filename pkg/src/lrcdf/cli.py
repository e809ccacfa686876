"""Command-line surface: train, eval, sample, impute, classify, plotdata.

All commands exchange headed CSV files (with a JSON sidecar schema for column
kinds) and the JSON model format.  Every command is deterministic under
``--seed``.  Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

import argparse
import itertools
import json
import sys
from dataclasses import dataclass, replace

import numpy as np

from .admm import AdmmConfig, fit_admm
from .copula import fit_marginal
from .empirical import Dataset, build_grid, ecdf_at_points, materialize_empirical, read_csv, write_csv
from .errors import CapacityError, ConfigError, DegenerateColumnError, DivergenceError, ZeroLikelihoodError
from .inference import (
    _log_jacobian,
    box_probability,
    classify,
    conditional_moments,
    density,
    impute,
    log_likelihood,
    marginalize,
    sample,
)
from .model import CONTINUOUS, CpdModel, DISCRETE, ModelMeta
from .sgd import SgdConfig, fit_sgd

DEFAULT_RANK_SET = (10, 20, 30, 50, 80, 100)
DEFAULT_LEVEL_SET = (10, 20, 30, 50)
SELECTION_POINTS = 2048


@dataclass
class RunConfig:
    """Resolved training configuration (mirrors the train flags)."""

    mode: str = "cdf"
    fitter: str = "auto"
    rank_set: tuple = DEFAULT_RANK_SET
    level_set: tuple = DEFAULT_LEVEL_SET
    val_fraction: float = 0.2
    seed: int = 0
    batch_size: int = 128
    learning_rate: float = 0.01
    max_iter: int = 20000
    patience: int = 20
    cells_cap: int = 1 << 20

    def __post_init__(self):
        if not self.rank_set or not self.level_set:
            raise ConfigError("candidate sets must be non-empty")
        if self.mode not in ("cdf", "copula"):
            raise ConfigError("mode must be 'cdf' or 'copula'")
        if self.fitter not in ("admm", "sgd", "auto"):
            raise ConfigError("fitter must be 'admm', 'sgd', or 'auto'")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val fraction must lie in (0, 1)")


def _parse_int_set(text):
    return tuple(int(tok) for tok in str(text).split(",") if tok.strip())


def _transform_columns(rows, kinds, transforms):
    out = rows.copy()
    for n, t in enumerate(transforms):
        if t is not None and kinds[n] == CONTINUOUS:
            out[:, n] = t.forward(rows[:, n])
    return out


def _model_space_rows(model, rows):
    """Map raw rows into the model's training space (affine or PIT)."""
    out = np.asarray(rows, dtype=float).copy()
    for n in range(model.ndim):
        if model.copula is not None and model.copula[n] is not None:
            out[:, n] = model.copula[n].forward(out[:, n])
        elif model.meta.shift is not None:
            out[:, n] = (out[:, n] - model.meta.shift[n]) / model.meta.scale[n]
    return out


def _model_predictions(model, idx):
    preds = np.ones((idx.shape[0], model.rank))
    for n in range(model.ndim):
        preds *= model.factors[n][idx[:, n], :]
    return preds @ model.weights


def _selection_points(rng, grid):
    if grid.cells() <= SELECTION_POINTS:
        axes = [np.arange(s) for s in grid.shape]
        return np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    return np.stack(
        [rng.integers(0, s, size=SELECTION_POINTS) for s in grid.shape], axis=1
    )


def train_model(data, names, cfg):
    """Grid-search (rank, levels) candidates; return (model, report dict).

    Rows are split once into a training part (fitting) and a validation part;
    each candidate is scored by the MSE between its grid CDF and the held-out
    rows' empirical CDF on a fixed random set of lattice points.
    """
    kinds = tuple(data.kind(n) for n in range(data.n_dims))
    rows = data.complete_rows()
    if rows.shape[0] < 10:
        raise ConfigError("need at least 10 complete rows to train")
    rng = np.random.default_rng(cfg.seed)
    n_val = int(rows.shape[0] * cfg.val_fraction)
    if n_val < 1 or rows.shape[0] - n_val < 1:
        raise ConfigError("validation split leaves an empty train or validation set")
    perm = rng.permutation(rows.shape[0])
    val_rows, train_rows = rows[perm[:n_val]], rows[perm[n_val:]]

    shift = scale = None
    transforms = None
    if cfg.mode == "cdf":
        shift = np.zeros(data.n_dims)
        scale = np.ones(data.n_dims)
        for n in range(data.n_dims):
            if kinds[n] == CONTINUOUS:
                shift[n] = train_rows[:, n].mean()
                scale[n] = train_rows[:, n].std()
                if scale[n] <= 0:
                    raise DegenerateColumnError(f"column {n} is constant")
        train_t = (train_rows - shift) / scale
        val_t = (val_rows - shift) / scale
    else:
        transforms = [
            fit_marginal(train_rows[:, n]) if kinds[n] == CONTINUOUS else None
            for n in range(data.n_dims)
        ]
        train_t = _transform_columns(train_rows, kinds, transforms)
        val_t = _transform_columns(val_rows, kinds, transforms)

    train_set = Dataset(train_t, kinds=kinds)
    candidates = []
    best = None
    for rank, levels in itertools.product(cfg.rank_set, cfg.level_set):
        grid = build_grid(train_set, levels)
        fitter = cfg.fitter
        if fitter == "auto":
            fitter = "admm" if grid.cells() <= cfg.cells_cap else "sgd"
        if fitter == "admm":
            emp = materialize_empirical(train_set, grid, max_cells=cfg.cells_cap)
            model = fit_admm(emp, AdmmConfig(rank=rank, seed=cfg.seed))
        else:
            model = fit_sgd(
                train_set,
                grid,
                SgdConfig(
                    rank=rank,
                    batch_size=cfg.batch_size,
                    learning_rate=cfg.learning_rate,
                    max_iter=cfg.max_iter,
                    patience=cfg.patience,
                    val_fraction=cfg.val_fraction,
                    seed=cfg.seed,
                ),
            )
        pts = _selection_points(np.random.default_rng([cfg.seed, rank, levels]), grid)
        targets = ecdf_at_points(val_t, grid, pts)
        mse = float(np.mean((_model_predictions(model, pts) - targets) ** 2))
        candidates.append({"rank": rank, "levels": levels, "fitter": fitter, "val_mse": mse})
        if best is None or mse < best[0]:
            best = (mse, model, candidates[-1])

    meta = ModelMeta(
        names=tuple(names),
        kinds=kinds,
        shift=tuple(shift) if shift is not None else None,
        scale=tuple(scale) if scale is not None else None,
    )
    model = replace(best[1], meta=meta, copula=tuple(transforms) if transforms else None)
    report = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "val_fraction": cfg.val_fraction,
        "candidates": candidates,
        "best": best[2],
    }
    return model, report


def eval_model(model, data):
    """Mean log-likelihood plus per-dimension marginal fit statistics."""
    rows = data.complete_rows()
    ll = log_likelihood(model, rows)
    rows_t = _model_space_rows(model, rows)
    marginals = []
    for n in range(model.ndim):
        knot_cdf = model.factors[n] @ model.weights
        ecdf = np.searchsorted(np.sort(rows_t[:, n]), model.grid.cutoffs[n], side="right")
        ecdf = ecdf / rows_t.shape[0]
        dev = np.abs(knot_cdf - ecdf)
        name = model.meta.names[n] if model.meta.names else f"x{n}"
        marginals.append(
            {"name": name, "max_abs": float(dev.max()), "mean_abs": float(dev.mean())}
        )
    return {"rows": int(rows.shape[0]), "mean_log_likelihood": ll, "marginals": marginals}


# -- commands ----------------------------------------------------------------


def _run_config(args):
    return RunConfig(
        mode=args.mode,
        fitter=args.fitter,
        rank_set=_parse_int_set(args.rank_set),
        level_set=_parse_int_set(args.level_set),
        val_fraction=args.val_frac,
        seed=args.seed,
        batch_size=args.batch,
        learning_rate=args.lr,
        max_iter=args.max_iter,
        patience=args.patience,
        cells_cap=args.cells_cap,
    )


def cmd_train(args):
    data, names = read_csv(args.data, args.schema)
    model, report = train_model(data, names, _run_config(args))
    model.save(args.out)
    report_path = args.report or args.out + ".report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report["best"]))
    return 0


def _check_names(model, names):
    if model.meta.names and list(model.meta.names) != list(names):
        raise ValueError(
            f"columns {list(names)} do not match the model's {list(model.meta.names)}"
        )


def cmd_eval(args):
    model = CpdModel.load(args.model)
    data, names = read_csv(args.data, args.schema)
    _check_names(model, names)
    report = eval_model(model, data)
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text)
    return 0


def cmd_sample(args):
    model = CpdModel.load(args.model)
    draws = sample(model, args.count, seed=args.seed)
    header = list(model.meta.names) if model.meta.names else [f"x{n}" for n in range(model.ndim)]
    write_csv(args.out, header, draws)
    return 0


def cmd_impute(args):
    model = CpdModel.load(args.model)
    data, names = read_csv(args.data, args.schema)
    _check_names(model, names)
    completed = []
    for row in data.samples:
        missing = np.isnan(row)
        if not missing.any():
            filled = row
        elif missing.all():
            # no evidence at all: fall back to the prior mixture expectation
            filled = np.array(
                [conditional_moments(model, {}, n)[0] for n in range(model.ndim)]
            )
        else:
            filled = impute(model, row, on_zero="uniform")
        completed.append(list(filled) + [int(m) for m in missing])
    header = list(names) + [f"{name}__imputed" for name in names]
    write_csv(args.out, header, completed)
    return 0


def cmd_classify(args):
    model = CpdModel.load(args.model)
    data, names = read_csv(args.data, args.schema)
    _check_names(model, names)
    if args.label not in names:
        raise ValueError(f"label column {args.label!r} not in the CSV header")
    label_dim = names.index(args.label)
    support = model.grid.cutoffs[label_dim]
    rows_out = []
    for row in data.samples:
        label, probs = classify(model, row, label_dim, on_zero="uniform")
        rows_out.append(list(row[:]) + [label] + list(probs))
    header = (
        list(names)
        + [f"{args.label}__predicted"]
        + [f"p_{_fmt_class(c)}" for c in support]
    )
    write_csv(args.out, header, [[_nan_to_blank(v) for v in r] for r in rows_out])
    return 0


def _fmt_class(value):
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def _nan_to_blank(value):
    if isinstance(value, float) and np.isnan(value):
        return ""
    return value


def cmd_plotdata(args):
    model = CpdModel.load(args.model)
    names = list(model.meta.names) if model.meta.names else [f"x{n}" for n in range(model.ndim)]
    dims = []
    for tok in args.dims.split(","):
        tok = tok.strip()
        dims.append(names.index(tok) if tok in names else int(tok))
    if len(dims) != 2:
        raise ValueError("--dims must name exactly two dimensions")
    marg = marginalize(model, dims)
    res = args.resolution
    axes = []
    for n in range(2):
        cuts = marg.grid.cutoffs[n]
        lo = _raw_coord(marg, n, cuts[0])
        hi = _raw_coord(marg, n, cuts[-1])
        edges = np.linspace(lo, hi, res + 1)
        axes.append(0.5 * (edges[:-1] + edges[1:]))
    rows = []
    for x in axes[0]:
        for y in axes[1]:
            pt = np.array([x, y])
            cdf = box_probability(marg, ((None, x), (None, y)))
            dens = density(marg, pt) * float(np.exp(_log_jacobian(marg, pt)))
            rows.append([x, y, cdf, dens])
    write_csv(args.out, [names[dims[0]], names[dims[1]], "cdf", "density"], rows)
    return 0


def _raw_coord(model, n, u):
    if model.copula is not None and model.copula[n] is not None:
        return float(model.copula[n].inverse(u))
    if model.meta.shift is not None:
        return model.meta.shift[n] + model.meta.scale[n] * u
    return float(u)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lrcdf",
        description="Low-rank CDF models: train on CSV data and answer probabilistic queries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model with (rank, levels) selection")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--mode", choices=["cdf", "copula"], default="cdf")
    p.add_argument("--fitter", choices=["admm", "sgd", "auto"], default="auto")
    p.add_argument("--rank-set", default=",".join(map(str, DEFAULT_RANK_SET)))
    p.add_argument("--level-set", default=",".join(map(str, DEFAULT_LEVEL_SET)))
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--cells-cap", type=int, default=1 << 20)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="log-likelihood and marginal fit report")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sample", help="draw samples to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("impute", help="fill missing cells with conditional means")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("classify", help="predict a discrete column")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--label", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("plotdata", help="gridded 2-D density/CDF values for plotting")
    p.add_argument("--model", required=True)
    p.add_argument("--dims", required=True, help="two column names or indices, comma separated")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DivergenceError, CapacityError, ZeroLikelihoodError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
