"""Command-line interface: simulate, fit, select, eval and export-plot.

Exit status is 0 on success, 1 when a computation fails (every restart of a
fit failed, a model is not positive definite) and 2 for usage or input errors.
Tables go to stdout; progress and diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .coords import TensorShape, grid_coords
from .covariance import BETA_MAX, BETA_MIN, Family, SpatialParams, build_covariance, factorize, sigmoid_h
from .errors import FitError, FormatError, ShapeError
from .io import Dataset, read_dataset, read_labels, read_model, write_dataset, write_labels, write_model, write_result
from .metrics import ContingencyTable, ari, match_components, rand_index
from .mixture import INIT_STRATEGIES, FitConfig, MixtureModel, center_by_group, fit
from .selection import scores_csv, select_g
from .simulate import RNG_ALGORITHM, SimSpec, preset, sample

log = logging.getLogger("spatgmm")

THREADS_ENV = "SPATGMM_THREADS"

DECAY_CURVE_BETAS = (4.0, 10.0)
# The sigmoid covariance loses positive definiteness on large grids unless the
# nugget alpha3 dominates alpha2; these defaults factorize on a 100x100 grid.
FIELD_ALPHA = (4.0, 1.0, 40.0)
FIELD_BETA = 10.0


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit status 2."""


def default_jobs() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parse_g_range(text: str) -> list[int]:
    """``"2..6"``, ``"3"`` or ``"2,4,6"`` to a sorted list of component counts."""
    try:
        if ".." in text:
            lo, hi = (int(t) for t in text.split(".."))
            values = list(range(lo, hi + 1))
        else:
            values = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse G range {text!r}; use e.g. 2..6") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"G range {text!r} is empty or contains G < 1")
    return sorted(set(values))


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _shape(text: str) -> TensorShape:
    try:
        return TensorShape.parse(text)
    except ShapeError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- datasets ---------------------------------------------------------------


def _spec_from_args(args, seed) -> SimSpec:
    if args.spec is not None:
        try:
            doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read spec file: {exc}") from None
        doc = {**doc, "n": args.n, "seed": seed}
        if getattr(args, "pi", None) is not None:
            doc["pi"] = args.pi
        try:
            return SimSpec.from_dict(doc)
        except (KeyError, TypeError) as exc:
            raise UsageError(f"invalid spec file: {exc}") from None
    return preset(args.design, n=args.n, seed=seed, pi=getattr(args, "pi", None))


def _dataset_from_spec(spec: SimSpec) -> Dataset:
    data, labels = sample(spec)
    return Dataset(
        shape=spec.shape,
        data=data,
        labels=labels,
        generator=spec.to_dict(),
        meta={"rng": RNG_ALGORITHM, "generated_by": f"spatgmm {__version__}"},
    )


def _datasets(args):
    """``[(seed, Dataset)]``: the data file, or one simulated set per repeat."""
    if args.data is not None:
        if args.design is not None or args.spec is not None:
            raise UsageError("give either a data file or --design/--spec, not both")
        if args.repeats != 1:
            raise UsageError("--repeats needs --design or --spec (it simulates one dataset per seed)")
        try:
            return [(args.seed, read_dataset(args.data))]
        except OSError as exc:
            raise UsageError(f"cannot read {args.data}: {exc.strerror}") from None
    if args.design is None and args.spec is None:
        raise UsageError("need a data file, --design or --spec")
    if args.n is None:
        raise UsageError("--n is required when simulating")
    seeds = [args.seed + r for r in range(args.repeats)]
    return [(s, _dataset_from_spec(_spec_from_args(args, s))) for s in seeds]


def _fit_config(args, seed) -> FitConfig:
    return FitConfig(
        tol=args.tol,
        max_iter=args.max_iter,
        n_starts=args.starts,
        seed=seed,
        init_strategy=args.init,
        family=args.family,
        constrained=args.constrained,
    )


def _prepare(ds: Dataset, args):
    data = ds.data
    if args.center_by_labels:
        if ds.labels is None:
            raise UsageError("--center-by-labels needs a labels sidecar")
        data = center_by_group(data, ds.labels)
    return data, ds.coordinate_system()


def _map_parallel(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# -- tables -----------------------------------------------------------------


def _param_table(model: MixtureModel) -> str:
    head = f"{'group':>7} {'pi':>8} {'alpha1':>10} {'alpha2':>10} {'alpha3':>10}"
    if model.family is Family.SIGMOID:
        head += f" {'beta':>10}"
    rows = [head]
    groups = [("shared", None)] if model.constrained else [(str(g + 1), g) for g in range(model.G)]
    for name, g in groups:
        sp = model.spatial[0 if g is None else g]
        pi = "-" if g is None else f"{model.pi[g]:.4f}"
        line = f"{name:>7} {pi:>8} {sp.alpha1:>10.4f} {sp.alpha2:>10.4f} {sp.alpha3:>10.4f}"
        if model.family is Family.SIGMOID:
            line += f" {sp.beta:>10.4f}"
        rows.append(line)
    return "\n".join(rows)


# -- subcommands ------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args, args.seed)
    ds = _dataset_from_spec(spec)
    out = Path(args.out or f"{spec.name}-n{spec.n}-seed{spec.seed}.csv")
    write_dataset(out, ds)
    print(f"design\t{spec.name}")
    print(f"shape\t{spec.shape}")
    print(f"n\t{spec.n}")
    print(f"seed\t{spec.seed}")
    print(f"pi\t{','.join(repr(float(v)) for v in spec.pi)}")
    print(f"group_counts\t{','.join(str(int(c)) for c in np.bincount(ds.labels, minlength=spec.G))}")
    print(f"dataset\t{out}")
    print(f"labels\t{out}.labels")
    return 0


def _fit_one(item, args):
    seed, ds = item
    data, cs = _prepare(ds, args)
    res = fit(data, cs, args.groups, _fit_config(args, seed))
    score = None if ds.labels is None else ari(ds.labels, res.hard_labels)
    return res, score


def cmd_fit(args) -> int:
    items = _datasets(args)
    outs = _map_parallel(partial(_fit_one, args=args), items, args.jobs)
    if len(items) == 1:
        (seed, ds), (res, score) = items[0], outs[0]
        print(f"loglik\t{res.loglik:.6f}")
        print(f"bic\t{res.bic:.6f}\t(2*loglik - k*log(N), higher is better)")
        print(f"k\t{res.n_params}")
        print(f"iterations\t{res.iterations}")
        print(f"converged\t{str(res.converged).lower()}")
        if score is not None:
            print(f"ari\t{score:.6f}")
        print(_param_table(res.model))
        if args.out_model:
            write_model(args.out_model, res.model)
        if args.out_result:
            write_result(args.out_result, res)
        if args.out_labels:
            write_labels(args.out_labels, res.hard_labels)
        return 0
    _print_repeat_summary(items, outs, args)
    return 0


def _print_repeat_summary(items, outs, args):
    G = args.groups
    est = np.full((len(items), G, 5), np.nan)  # pi, alpha1..3, beta per true group
    aris = []
    for r, ((seed, ds), (res, score)) in enumerate(zip(items, outs)):
        aris.append(score)
        match = match_components(ds.labels, res.hard_labels, G)
        for g_true, g_fit in match.items():
            if g_true < G:
                sp = res.model.spatial[g_fit]
                est[r, g_true] = (res.model.pi[g_fit], sp.alpha1, sp.alpha2, sp.alpha3, sp.beta)
        print(f"# repeat seed={seed} loglik={res.loglik:.4f} bic={res.bic:.4f} ari={score:.4f}", file=sys.stderr)
    mean = np.nanmean(est, axis=0)
    sd = np.nanstd(est, axis=0, ddof=1) if len(items) > 1 else np.zeros_like(mean)
    names = ["pi", "alpha1", "alpha2", "alpha3", "beta"]
    print(f"repeats\t{len(items)}")
    print(f"mean_ari\t{np.mean(aris):.6f}")
    print("group\t" + "\t".join(f"{n}_mean\t{n}_sd" for n in names))
    for g in range(G):
        cells = "\t".join(f"{mean[g, j]:.4f}\t{sd[g, j]:.4f}" for j in range(len(names)))
        print(f"{g + 1}\t{cells}")


def _select_one(item, args):
    seed, ds = item
    data, cs = _prepare(ds, args)
    return select_g(data, cs, args.g_range, _fit_config(args, seed))


def cmd_select(args) -> int:
    items = _datasets(args)
    outs = _map_parallel(partial(_select_one, args=args), items, args.jobs)
    if len(items) == 1:
        sel = outs[0]
        sys.stdout.write(scores_csv(sel.scores))
        print(f"# best G={sel.best_score.G} bic={sel.best_score.bic:.6f}")
        for G, msg in sel.failures.items():
            print(f"# G={G} failed: {msg}", file=sys.stderr)
    else:
        counts = {G: 0 for G in args.g_range}
        for (seed, _), sel in zip(items, outs):
            counts[sel.best_score.G] += 1
            print(f"# repeat seed={seed} best G={sel.best_score.G}", file=sys.stderr)
        print("G\tselected")
        for G in args.g_range:
            print(f"{G}\t{counts[G]}")
    if args.out_scores:
        from .io import atomic_write_text

        if len(outs) == 1:
            atomic_write_text(args.out_scores, scores_csv(outs[0].scores))
        else:
            lines = ["seed," + scores_csv([]).strip()]
            for (seed, _), sel in zip(items, outs):
                lines.extend(f"{seed},{row}" for row in scores_csv(sel.scores).strip().splitlines()[1:])
            atomic_write_text(args.out_scores, "\n".join(lines) + "\n")
    if args.out_model:
        write_model(args.out_model, outs[0].best_result.model)
    return 0


def cmd_eval(args) -> int:
    try:
        a, b = read_labels(args.labels_a), read_labels(args.labels_b)
    except OSError as exc:
        raise UsageError(f"cannot read labels: {exc}") from None
    try:
        table = ContingencyTable.from_labels(a, b)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"n\t{table.n}")
    print(f"ari\t{ari(a, b):.12f}")
    print(f"rand_index\t{rand_index(a, b):.12f}")
    return 0


def _write_rows(out, header, rows):
    if out is None or out == "-":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    import io as _io

    from .io import atomic_write_text

    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(out, buf.getvalue())


def _export_decay_curves(args):
    d = np.linspace(0.0, 2.0, args.points)
    rows = [("quadratic", 0.0, repr(float(x)), repr(float(x * x))) for x in d] if args.with_quadratic else []
    for beta in args.beta or DECAY_CURVE_BETAS:
        h = sigmoid_h(d, beta)
        rows.extend(("sigmoid", repr(float(beta)), repr(float(x)), repr(float(y))) for x, y in zip(d, h))
    return ("family", "beta", "x", "y"), rows


def _field_covariance(args):
    if args.model is not None:
        model = read_model(args.model)
        if not isinstance(model, MixtureModel):
            raise UsageError("sim-field needs a spatial model, not a full-covariance baseline")
        if not 1 <= args.component <= model.G:
            raise UsageError(f"--component must be in 1..{model.G}")
        g = args.component - 1
        return model.cs, model.factors[g], model.mu[g]
    alpha = args.alpha or FIELD_ALPHA
    if len(alpha) != 3:
        raise UsageError("--alpha takes three values a1,a2,a3")
    cs = grid_coords(args.shape)
    beta = args.beta[0] if args.beta else FIELD_BETA
    sp = SpatialParams(*alpha, beta=beta, family=args.family)
    return cs, factorize(build_covariance(cs, sp)), np.zeros(cs.p)


def _export_sim_field(args):
    cs, factor, mu = _field_covariance(args)
    rng = np.random.default_rng(args.seed)
    field = mu + factor.chol @ rng.standard_normal(cs.p)
    subs = cs.coords.astype(np.int64) if cs.mode == "grid" else None
    order = cs.shape.order
    rows = []
    for j in range(cs.p):
        if subs is not None:
            r = int(subs[j, 0])
            c = int(subs[j, 1]) if order > 1 else 1
        else:
            r, c = j + 1, 1
        rows.append((r, c, repr(float(field[j]))))
    return ("row", "col", "value"), rows


def _export_spectra_grid(args):
    if args.model is None:
        raise UsageError("spectra-grid needs --model (a fitted model file)")
    model = read_model(args.model)
    if not isinstance(model, MixtureModel):
        raise UsageError("spectra-grid needs a spatial model")
    d = np.linspace(0.0, 2.0, args.points)
    rows = []
    comps = [0] if model.constrained else range(model.G)
    for g in comps:
        sp = model.spatial[g]
        h = sigmoid_h(d, sp.beta) if sp.family is Family.SIGMOID else d * d
        cov = sp.alpha1 - sp.alpha2 * h
        name = "shared" if model.constrained else str(g + 1)
        rows.extend((name, repr(float(x)), repr(float(y)), repr(float(c))) for x, y, c in zip(d, h, cov))
    return ("component", "x", "decay", "covariance"), rows


EXPORTERS = {
    "decay-curves": _export_decay_curves,
    "sim-field": _export_sim_field,
    "spectra-grid": _export_spectra_grid,
}


def cmd_export_plot(args) -> int:
    header, rows = EXPORTERS[args.kind](args)
    _write_rows(args.out, header, rows)
    return 0


# -- parser -----------------------------------------------------------------


def _add_source_args(p):
    p.add_argument("data", nargs="?", help="dataset file (omit to simulate with --design/--spec)")
    p.add_argument("--design", choices=("I", "II", "III"), help="simulate from a preset design")
    p.add_argument("--spec", help="simulate from a JSON generator spec")
    p.add_argument("--n", type=int, help="observations per simulated dataset")
    p.add_argument("--pi", type=_float_list, help="override mixing proportions of the preset")
    p.add_argument("--repeats", type=int, default=1, help="simulated datasets, seeds seed..seed+R-1")


def _add_fit_args(p):
    p.add_argument("--family", choices=[f.value for f in Family], default="sigmoid")
    p.add_argument("--constrained", action="store_true", help="share one spatial parameter set across groups")
    p.add_argument("--center-by-labels", action="store_true", help="subtract within-label means first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=5, help="random restarts (best loglik kept)")
    p.add_argument("--tol", type=float, default=1e-8, help="relative loglik change for convergence")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--init", choices=INIT_STRATEGIES, default="kmeans")
    p.add_argument("--jobs", type=int, default=default_jobs(), help=f"parallel repeats (default ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatgmm", description="Spatial Gaussian mixtures for tensor-shaped data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a dataset from a preset design or spec")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--design", choices=("I", "II", "III"))
    src.add_argument("--spec", help="JSON generator spec")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pi", type=_float_list)
    p.add_argument("--out", help="dataset path (labels go to <out>.labels)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a G-component model")
    _add_source_args(p)
    p.add_argument("--groups", "-G", type=int, required=True)
    _add_fit_args(p)
    p.add_argument("--out-model")
    p.add_argument("--out-result")
    p.add_argument("--out-labels")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="choose G by BIC")
    _add_source_args(p)
    p.add_argument("--g-range", type=parse_g_range, default=parse_g_range("1..5"))
    _add_fit_args(p)
    p.add_argument("--out-scores", help="CSV of per-G scores")
    p.add_argument("--out-model", help="best model (first dataset)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="ARI and Rand index between two label files")
    p.add_argument("labels_a")
    p.add_argument("labels_b")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-plot", help="CSV series for external plotting")
    p.add_argument("--kind", choices=sorted(EXPORTERS), required=True)
    p.add_argument("--beta", type=_float_list, help="sigmoid sharpness; a list for decay-curves")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--with-quadratic", action="store_true", help="decay-curves: add the quadratic curve")
    p.add_argument("--shape", type=_shape, default=TensorShape((100, 100)))
    p.add_argument("--alpha", type=_float_list, help="sim-field: a1,a2,a3")
    p.add_argument("--family", choices=[f.value for f in Family], default="sigmoid")
    p.add_argument("--model", help="fitted model file")
    p.add_argument("--component", type=int, default=1, help="1-based component of --model")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_export_plot)
    return parser


def _check_args(args):
    for name in ("repeats", "starts", "max_iter", "groups", "jobs", "n", "points"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
    beta = getattr(args, "beta", None)
    if beta is not None and any(not BETA_MIN <= b <= BETA_MAX for b in beta):
        raise UsageError(f"--beta values must lie in [{BETA_MIN}, {BETA_MAX}]")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_args(args)
        return args.func(args)
    except (UsageError, FormatError, ShapeError) as exc:
        print(f"spatgmm: error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"spatgmm: fit failed: {exc}", file=sys.stderr)
        for r in exc.restarts:
            print(f"  {r}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"spatgmm: numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"spatgmm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
