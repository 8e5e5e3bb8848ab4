"""Command-line entry point: synth -> integrate -> cluster / embed -> eval."""

import argparse
import contextlib
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from threadpoolctl import threadpool_limits

from config import Config
from data_simulator import MvagDataSimulator, SbmSpec
from dataset_manager import DatasetManager
from downstream import clustering_metrics, spectral_clustering, spectral_embedding
from exceptions import InvalidParameter, MvagError
from integrate import (SglaParams, baseline_weights, run_sgla, run_sgla_plus, with_overrides)
from surface_plot import objective_surface, surface_figure
from views import build_view_laplacians

logger = logging.getLogger("mvag")

METHODS = ("sgla", "sgla+", "equal", "single=i", "eigengap", "connectivity", "graph-agg")


def _require(args, name: str):
    value = getattr(args, name.replace("-", "_"))
    if value is None:
        raise InvalidParameter(f"missing required --{name}")
    return value


def _params(args) -> SglaParams:
    return with_overrides(
        SglaParams(),
        gamma=getattr(args, "gamma", None),
        epsilon=getattr(args, "epsilon", None),
        t_max=getattr(args, "tmax", None),
        alpha_r=getattr(args, "alpha_r", None),
        knn_k=getattr(args, "knn", None),
        seed=getattr(args, "seed", None),
        safeguard=getattr(args, "safeguard", None) or None,
        restart_optimizer=getattr(args, "restart", None) or None,
        workers=None if getattr(args, "serial", False) else getattr(args, "workers", None),
    )


def cmd_integrate(args) -> int:
    manifest = _require(args, "dataset")
    k = _require(args, "k")
    out = Path(_require(args, "out"))
    params = _params(args)
    manager = DatasetManager(Config)
    dataset = manager.load_dataset(manifest)
    laplacians = build_view_laplacians(dataset, params.knn_k)

    method = args.method
    if method == "sgla":
        result = run_sgla(laplacians, k, params)
    elif method == "sgla+":
        result = run_sgla_plus(laplacians, k, params)
    elif method.startswith("single="):
        try:
            view = int(method.split("=", 1)[1])
        except ValueError:
            raise InvalidParameter(f"bad view index in --method {method}") from None
        result = baseline_weights("single", laplacians, k, params, view=view)
    elif method in ("equal", "eigengap", "connectivity", "graph-agg"):
        result = baseline_weights(method, laplacians, k, params)
    else:
        raise InvalidParameter(f"unknown --method {method!r}; choose from {', '.join(METHODS)}")

    manager.save_json({"method": result.method,
                       "weights": [float(w) for w in result.weights],
                       "evaluations": result.evaluations,
                       "converged": result.converged}, out / "weights.json")
    manager.save_laplacian(result.laplacian, out / "laplacian.mtx")
    manager.save_trace(result.trace, len(laplacians), out / "trace.csv")
    print(f"✅ {result.method}: w={np.round(result.weights, 4).tolist()} "
          f"({result.evaluations} evaluations, {result.wall_time:.2f}s) -> {out}")
    return 0


def cmd_cluster(args) -> int:
    k = _require(args, "k")
    manager = DatasetManager(Config)
    laplacian = manager.load_laplacian(_require(args, "laplacian"))
    labels = spectral_clustering(laplacian, k, args.seed if args.seed is not None else Config.SEED)
    out = Path(_require(args, "out"))
    manager.save_labels(labels, out)
    print(f"✅ Wrote {len(labels)} cluster labels to {out}")
    return 0


def cmd_embed(args) -> int:
    dim = args.dim if args.dim is not None else Config.EMBED_DIM
    manager = DatasetManager(Config)
    laplacian = manager.load_laplacian(_require(args, "laplacian"))
    embedding = spectral_embedding(laplacian, dim, args.seed if args.seed is not None else Config.SEED)
    out = Path(_require(args, "out"))
    manager.save_embedding(embedding, out)
    print(f"✅ Wrote {embedding.shape[0]}x{embedding.shape[1]} embedding to {out}")
    return 0


def cmd_eval(args) -> int:
    manager = DatasetManager(Config)
    pred = manager.load_labels(_require(args, "pred"))
    truth = manager.load_labels(_require(args, "truth"))
    metrics = clustering_metrics(pred, truth)
    if args.out:
        manager.save_json(metrics, Path(args.out))
    print(" ".join(f"{name}={value:.4f}" for name, value in metrics.items()))
    return 0


def cmd_synth(args) -> int:
    spec = SbmSpec.from_json(_require(args, "spec"))
    dataset = MvagDataSimulator(Config).generate_dataset(spec)
    manifest = DatasetManager(Config).save_dataset(dataset, Path(_require(args, "out")))
    print(f"✅ Wrote synthetic dataset {dataset.name} (n={dataset.n}, r={dataset.r}) to {manifest}")
    return 0


def cmd_surface(args) -> int:
    k = _require(args, "k")
    out = Path(_require(args, "out"))
    params = _params(args)
    manager = DatasetManager(Config)
    dataset = manager.load_dataset(_require(args, "dataset"))
    laplacians = build_view_laplacians(dataset, params.knn_k)
    surrogate = run_sgla_plus(laplacians, k, params).surrogate if args.with_surrogate else None
    frame = objective_surface(laplacians, params.objective(k), args.step, surrogate)
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "surface.csv", index=False, float_format="%.17g")
    surface_figure(frame, f"{dataset.name}: objective landscape").write_html(
        str(out / "surface.html"), include_plotlyjs="cdn")
    print(f"✅ Wrote {len(frame)} grid points and the landscape figure to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--serial", action="store_true", help="single-threaded, bit-reproducible run")
    common.add_argument("--verbose", action="store_true")

    tuning = argparse.ArgumentParser(add_help=False)
    tuning.add_argument("--dataset")
    tuning.add_argument("--k", type=int)
    tuning.add_argument("--gamma", type=float)
    tuning.add_argument("--epsilon", type=float)
    tuning.add_argument("--tmax", type=int)
    tuning.add_argument("--alpha-r", type=float)
    tuning.add_argument("--knn", type=int)
    tuning.add_argument("--workers", type=int)
    tuning.add_argument("--out")

    parser = argparse.ArgumentParser(prog="mvag", description="Spectrum-guided multi-view graph integration")
    sub = parser.add_subparsers(dest="command", required=True)

    integrate = sub.add_parser("integrate", parents=[common, tuning], help="learn view weights")
    integrate.add_argument("--method", default="sgla+", help=f"one of {', '.join(METHODS)}")
    integrate.add_argument("--safeguard", action="store_true")
    integrate.add_argument("--restart", action="store_true", help="restart the optimizer every iteration")
    integrate.set_defaults(handler=cmd_integrate)

    cluster = sub.add_parser("cluster", parents=[common], help="spectral clustering of a Laplacian")
    cluster.add_argument("--laplacian")
    cluster.add_argument("--k", type=int)
    cluster.add_argument("--out")
    cluster.set_defaults(handler=cmd_cluster)

    embed = sub.add_parser("embed", parents=[common], help="spectral embedding of a Laplacian")
    embed.add_argument("--laplacian")
    embed.add_argument("--dim", type=int)
    embed.add_argument("--out")
    embed.set_defaults(handler=cmd_embed)

    evaluate = sub.add_parser("eval", parents=[common], help="score predicted labels")
    evaluate.add_argument("--pred")
    evaluate.add_argument("--truth")
    evaluate.add_argument("--out")
    evaluate.set_defaults(handler=cmd_eval)

    synth = sub.add_parser("synth", parents=[common], help="generate a multi-view SBM dataset")
    synth.add_argument("--spec")
    synth.add_argument("--out")
    synth.set_defaults(handler=cmd_synth)

    surface = sub.add_parser("surface", parents=[common, tuning], help="plot h over the weight simplex")
    surface.add_argument("--step", type=float, default=0.05)
    surface.add_argument("--with-surrogate", action="store_true")
    surface.set_defaults(handler=cmd_surface)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else Config.LOG_LEVEL,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    threads = 1 if args.serial else Config.THREADS
    limits = threadpool_limits(limits=threads) if threads else contextlib.nullcontext()
    logger.debug("Running %s with %d BLAS threads", args.command, threads or 0)
    try:
        with limits:
            return args.handler(args)
    except (MvagError, OSError, ValueError) as exc:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"❌ {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
