"""Command-line front end: ``specclip <subcommand> ...``.

Exit status: 0 success, 2 usage error, 3 data error, 4 numerical error.
Failures print one ``error code=<Name> message=<text>`` line on stderr.
Summaries on stdout are single ``key=value`` lines.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import datagen, io
from .clip import LinearModel, clip_model
from .errors import DataError, NumericalError, NumericalOverflow, SpecClipError, TooShort
from .koopman import KoopmanModel, LiftingSpec, clip_koopman, fit_koopman, lift, mode_decompose, \
    predict_states, rollout_modes
from .simeval import (DIVERGENCE_BOUND, MOVING_THRESHOLD, bench_clip, format_bench, moving_ratio,
                      reconstruction_error, rollout, rollout_controlled)
from .linalg import spectral_radius
from .sysid import TrajectoryDataset, fit_ls, fit_ls_controlled

log = logging.getLogger("specclip")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4
SEED_ENV = "SPECCLIP_SEED"


def _eps(text):
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"eps must lie in [0, 1), got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _summary(**items):
    parts = []
    for key, value in items.items():
        if value is None:
            value = "none"
        elif isinstance(value, float):
            value = f"{value:.10g}"
        parts.append(f"{key}={value}")
    print(" ".join(parts))


def _initial_states(spec: str, n: int) -> List[np.ndarray]:
    """``zero``, ``unit`` (all-ones scaled to unit norm) or a trajectory CSV (first state of each)."""
    if spec == "zero":
        return [np.zeros(n)]
    if spec == "unit":
        return [np.ones(n) / np.sqrt(n)]
    dataset = io.load_trajectories(spec)
    if dataset.state_dim != n:
        raise DataError(f"x0 file has state dimension {dataset.state_dim}, model expects {n}")
    return [s[0] for s in dataset.states]


def _predict(model, x0, horizon):
    """States ``(<= H+1, n)`` and the divergence step (or None)."""
    if isinstance(model, KoopmanModel):
        states = predict_states(model, x0, horizon)
        norms = np.linalg.norm(states, axis=1)
        over = np.flatnonzero(norms > DIVERGENCE_BOUND)
        return states, (int(over[0]) if over.size else None)
    if model.B is not None:
        result = rollout_controlled(model.A, model.B, x0, np.zeros((horizon, model.m)))
    else:
        result = rollout(model.A, x0, horizon)
    return result.states, result.diverged_at


def cmd_gen(args):
    if args.kind == "polynomial":
        dataset, K = datagen.gen_polynomial_benchmark(args.seed, args.n_traj, args.T, args.rate)
        truth = KoopmanModel(K, LiftingSpec(2, 2))
    else:
        spec = datagen.GenSpec(kind=args.kind, n=args.n, m=args.m, rho_target=args.rho, n_traj=args.n_traj,
                               T=args.T, noise_sigma=args.noise, truncate_to=args.truncate_to,
                               failure_fraction=args.failure_fraction, seed=args.seed)
        dataset, system = datagen.generate(spec)
        truth = LinearModel(*system) if isinstance(system, tuple) else LinearModel(system)
    io.save_trajectories(dataset, args.out)
    if args.truth_out:
        io.save_model(truth, args.truth_out)
    _summary(kind=args.kind, n=dataset.state_dim, m=dataset.input_dim, n_traj=dataset.n_traj,
             seed=args.seed, out=args.out)


def cmd_fit(args):
    dataset = io.load_trajectories(args.data)
    if dataset.input_dim:
        A, B = fit_ls_controlled(dataset)
        model = LinearModel(A, B)
    else:
        model = LinearModel(fit_ls(dataset))
    io.save_model(model, args.out)
    _summary(type="linear", n=model.n, m=model.m, radius=spectral_radius(model.A), out=args.out)


def cmd_clip(args):
    model = io.load_model(args.model)
    if isinstance(model, KoopmanModel):
        clipped = clip_koopman(model, args.eps, rule=args.rule, seed=args.seed)
    else:
        clipped = clip_model(model, args.eps, rule=args.rule, seed=args.seed)
    io.save_model(clipped, args.out)
    r = clipped.clip_report
    _summary(eps=r.eps, n_clipped=r.n_clipped, radius_before=r.radius_before, radius_after=r.radius_after,
             gamma=r.perturbation_applied, cond_modal=r.cond_modal, rule=r.rule, out=args.out)


def cmd_koopman_fit(args):
    dataset = io.load_trajectories(args.data)
    model = fit_koopman(dataset, LiftingSpec(dataset.state_dim, args.degree))
    if args.eps is not None:
        model = clip_koopman(model, args.eps, rule=args.rule, seed=args.seed)
    io.save_model(model, args.out)
    report = model.clip_report
    _summary(type="koopman", n=dataset.state_dim, degree=args.degree, lifted_dim=model.spec.lifted_dim,
             clipped=report is not None, n_clipped=None if report is None else report.n_clipped, out=args.out)


def cmd_rollout(args):
    model = io.load_model(args.model)
    n = model.n
    runs = [_predict(model, x0, args.horizon) for x0 in _initial_states(args.x0, n)]
    io.save_trajectories(TrajectoryDataset(tuple(states for states, _ in runs)), args.out)
    diverged = [d for _, d in runs if d is not None]
    _summary(n_traj=len(runs), horizon=args.horizon, diverged=len(diverged),
             diverged_at=min(diverged) if diverged else None, out=args.out)


def _curve_over_trajectories(pred: Sequence[np.ndarray], truth: Sequence[np.ndarray], metric):
    """Mean per-step error over trajectories, each compared on its common prefix."""
    if len(pred) != len(truth):
        raise DataError(f"{len(pred)} predicted vs {len(truth)} true trajectories")
    length = max(min(len(p), len(t)) for p, t in zip(pred, truth))
    sums, counts = np.zeros(length), np.zeros(length)
    for p, t in zip(pred, truth):
        k = min(len(p), len(t))
        curve = reconstruction_error(p[:k], t[:k], metric)
        sums[:k] += curve.per_step
        counts[:k] += 1
    return sums / counts


def cmd_eval(args):
    pred = io.load_trajectories(args.pred)
    truth = io.load_trajectories(args.truth)
    per_step = _curve_over_trajectories(pred.states, truth.states, args.metric)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "error"])
        for t, e in enumerate(per_step):
            writer.writerow([t, io.fmt_float(e)])
    norms = [np.linalg.norm(s, axis=1) for s in pred.states]
    steps = [int(np.flatnonzero(nrm > DIVERGENCE_BOUND)[0]) for nrm in norms if np.any(nrm > DIVERGENCE_BOUND)]
    _summary(summary_mean=float(per_step.mean()), moving_ratio=moving_ratio(pred.states, args.threshold),
             diverged=len(steps), diverged_at=min(steps) if steps else None, out=args.out)


def _parse_subset(text: str, modes) -> List[int]:
    if text == "all":
        return list(range(len(modes.eigenvalues)))
    if text == "unstable":
        return modes.unstable_indices().tolist()
    if text == "stable":
        return np.flatnonzero(np.abs(modes.eigenvalues) <= 1.0).tolist()
    return _int_list(text)


def cmd_modes(args):
    model = io.load_model(args.model)
    modes = mode_decompose(model.K if isinstance(model, KoopmanModel) else model.A, seed=args.seed)
    subset = _parse_subset(args.subset, modes)
    runs = []
    for x0 in _initial_states(args.x0, model.n):
        z0 = lift(x0, model.spec) if isinstance(model, KoopmanModel) else x0
        runs.append(rollout_modes(modes, subset, z0, args.horizon))
    finite = all(np.all(np.isfinite(r)) for r in runs)
    if not finite:
        raise NumericalOverflow("mode rollout overflowed; shorten --horizon")
    io.save_trajectories(TrajectoryDataset(tuple(runs)), args.out)
    max_norm = max(float(np.linalg.norm(r, axis=1).max()) for r in runs)
    _summary(n_modes=len(modes.eigenvalues), subset_size=len(subset), max_norm=max_norm,
             gamma=modes.perturbation_applied, cond_modal=modes.cond_modal, out=args.out)


def sweep_eps(model, truth: TrajectoryDataset, values, horizon: int, metric="mae",
              threshold=MOVING_THRESHOLD, rule="margin", seed=0):
    """Clip ``model`` at each eps, roll out from every true initial state and score.

    Returns one dict per eps with ``summary_mean`` (``inf`` if any rollout
    diverged before the horizon), ``moving_ratio``, ``diverged_fraction``,
    ``radius_after`` and ``n_clipped``.
    """
    rows = []
    for eps in values:
        clipped = (clip_koopman if isinstance(model, KoopmanModel) else clip_model)(model, eps, rule=rule, seed=seed)
        preds, diverged = [], 0
        for states in truth.states:
            steps = min(horizon, len(states) - 1)
            p, d = _predict(clipped, states[0], steps)
            diverged += d is not None
            preds.append(p)
        if diverged:
            mean = float("inf")
        else:
            mean = float(_curve_over_trajectories(preds, truth.states, metric).mean())
        try:
            ratio = moving_ratio(preds, threshold)
        except TooShort:
            ratio = float("nan")
        rep = clipped.clip_report
        rows.append(dict(eps=float(eps), summary_mean=mean, moving_ratio=ratio,
                         diverged_fraction=diverged / truth.n_traj, radius_after=rep.radius_after,
                         n_clipped=rep.n_clipped))
    return rows


def cmd_sweep_eps(args):
    data = io.load_trajectories(args.data)
    truth = io.load_trajectories(args.truth) if args.truth else data
    if args.degree is not None:
        model = fit_koopman(data, LiftingSpec(data.state_dim, args.degree))
    elif data.input_dim:
        raise DataError("sweep-eps needs an autonomous dataset")
    else:
        model = LinearModel(fit_ls(data))
    rows = sweep_eps(model, truth, args.values, args.horizon, args.metric, args.threshold, args.rule, args.seed)
    keys = ["eps", "summary_mean", "moving_ratio", "diverged_fraction", "radius_after", "n_clipped"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(keys)
        for row in rows:
            writer.writerow([row[k] if isinstance(row[k], int) else io.fmt_float(row[k]) for k in keys])
    for row in rows:
        _summary(**row)


def cmd_bench(args):
    records, slope = bench_clip(args.dims, args.repeats, args.seed, measure_memory=args.memory)
    text = format_bench(records, slope)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    env_seed = os.environ.get(SEED_ENV)
    default_seed = int(env_seed) if env_seed not in (None, "") else 0

    parser = argparse.ArgumentParser(prog="specclip", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=default_seed,
                       help=f"random seed (default from ${SEED_ENV}, else 0)")
        return p

    p = add("gen", cmd_gen, "write a synthetic trajectory dataset")
    p.add_argument("--kind", choices=datagen.KINDS, default="linear")
    p.add_argument("--n", type=_positive_int, default=2)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--rho", type=float, default=0.9, help="spectral radius of the true A")
    p.add_argument("--n-traj", type=_positive_int, default=5)
    p.add_argument("--T", type=int, default=20, help="states per trajectory")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--truncate-to", type=int)
    p.add_argument("--failure-fraction", type=float, default=0.0)
    p.add_argument("--rate", type=float, default=0.9, help="x1 multiplier of the polynomial benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", help="also save the ground-truth model")

    p = add("fit", cmd_fit, "least-squares fit; controlled if the data has inputs")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = add("clip", cmd_clip, "spectrally clip a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--eps", type=_eps, default=0.0)
    p.add_argument("--rule", choices=("margin", "unit"), default="margin")
    p.add_argument("--out", required=True)

    p = add("koopman-fit", cmd_koopman_fit, "fit a state-inclusive polynomial Koopman model")
    p.add_argument("--data", required=True)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--eps", type=_eps, help="clip with this margin after fitting")
    p.add_argument("--rule", choices=("margin", "unit"), default="margin")
    p.add_argument("--out", required=True)

    p = add("rollout", cmd_rollout, "predict trajectories from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--x0", default="unit", help="'zero', 'unit' or a trajectory CSV (first state of each)")
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "score predicted trajectories against the truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--metric", choices=("mae", "mse"), default="mae")
    p.add_argument("--threshold", type=float, default=MOVING_THRESHOLD, help="moving-ratio L1 threshold")
    p.add_argument("--out", required=True)

    p = add("modes", cmd_modes, "roll out a subset of eigen-modes")
    p.add_argument("--model", required=True)
    p.add_argument("--subset", default="all", help="'all', 'unstable', 'stable' or 0-based indices '0,1'")
    p.add_argument("--x0", default="unit")
    p.add_argument("--horizon", type=_positive_int, default=50)
    p.add_argument("--out", required=True)

    p = add("sweep-eps", cmd_sweep_eps, "fit once, then clip/rollout/score for several eps")
    p.add_argument("--data", required=True)
    p.add_argument("--truth", help="trajectories to score against (default: --data)")
    p.add_argument("--values", type=_float_list, default=[0.0, 1e-5, 1e-2])
    p.add_argument("--horizon", type=_positive_int, default=200)
    p.add_argument("--degree", type=int, help="fit a Koopman model of this degree instead of a linear one")
    p.add_argument("--metric", choices=("mae", "mse"), default="mae")
    p.add_argument("--threshold", type=float, default=MOVING_THRESHOLD)
    p.add_argument("--rule", choices=("margin", "unit"), default="margin")
    p.add_argument("--out", required=True)

    p = add("bench", cmd_bench, "time clip_spectrum across dimensions")
    p.add_argument("--dims", type=_int_list, default=[64, 128, 256, 512])
    p.add_argument("--repeats", type=_positive_int, default=3)
    p.add_argument("--memory", action="store_true", help="also trace peak allocation")
    p.add_argument("--out")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "values", None) is not None and any(not 0 <= v < 1 for v in args.values):
        parser.error("--values must lie in [0, 1)")
    try:
        args.func(args)
    except SpecClipError as exc:
        status = EXIT_NUMERICAL if isinstance(exc, NumericalError) else EXIT_DATA
        print(f"error code={exc.code} message={exc}", file=sys.stderr)
        return status
    except OSError as exc:
        print(f"error code={type(exc).__name__} message={exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error code={type(exc).__name__} message={exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
