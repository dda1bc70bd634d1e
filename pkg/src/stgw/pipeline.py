"""Stage orchestration: each stage reads interface files and writes its own.

Stages communicate only through the CSV interfaces, so any stage can be
replayed in isolation and a full run is just the stages in order.  A failed
run clears the pipeline's output files (including partial ones) before the
error propagates, so the output directory never holds a stale mix.
"""

from __future__ import annotations

import os

import numpy as np

from . import classify as cl
from . import dataio, gat, report, sgwt
from .config import RunConfig
from .errors import StgwError, ValidationError
from .graphs import (CaseMatrix, RouteGraph, downsample_mask, laplacian,
                     normalize_cases, strong_product)

MANIFEST_NAME = "run-manifest.txt"


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.io.out, name)


def _ensure_out(cfg: RunConfig) -> None:
    os.makedirs(cfg.io.out, exist_ok=True)


def _manifest(cfg: RunConfig, section: str, values: dict) -> str:
    path = _out(cfg, MANIFEST_NAME)
    dataio.update_manifest(path, section, values)
    return path


def load_inputs(cfg: RunConfig) -> tuple[RouteGraph, CaseMatrix, CaseMatrix]:
    """Ingest and validate the three input files; returns (graph, raw, per-thousand)."""
    graph, raw = dataio.ingest(cfg.io.nodes, cfg.io.edges, cfg.io.cases)
    features = normalize_cases(raw, graph.populations, graph.node_ids)
    return graph, raw, features


def stage_build_graph(cfg: RunConfig) -> dict:
    """Validation pass; returns summary counts (writes nothing)."""
    graph, raw, _ = load_inputs(cfg)
    return {
        "nodes": graph.n,
        "edges": len(graph.edges),
        "weeks": raw.weeks,
        "isolated": list(graph.isolated_ids),
    }


def stage_train(cfg: RunConfig) -> list[str]:
    """Train the attention network; writes transition.csv and the checkpoint."""
    _ensure_out(cfg)
    graph, _, features = load_inputs(cfg)
    samples = gat.make_samples(graph, seed=cfg.gat.seed)
    model = gat.GatModel.create(
        feature_dim=features.weeks,
        heads=cfg.gat.heads,
        head_dim=cfg.gat.hidden,
        out_dim=cfg.gat.out,
        seed=cfg.gat.seed,
    )
    train_cfg = gat.TrainConfig(
        learning_rate=cfg.gat.lr,
        patience=cfg.gat.patience,
        max_epochs=cfg.gat.max_epochs,
        seed=cfg.gat.seed,
    )
    trained, history = gat.train(model, graph, features, samples, train_cfg)
    transition = gat.extract_transition(trained, graph, features)

    transition_path = _out(cfg, "transition.csv")
    ckpt_path = _out(cfg, "gat_model.ckpt")
    dataio.write_transition(transition_path, graph, transition)
    dataio.save_checkpoint(ckpt_path, trained)
    manifest = _manifest(cfg, "gat", {
        **cfg.resolved()["gat"],
        "epochs_run": len(history["train_loss"]),
        "best_epoch": history["best_epoch"],
        "best_val_loss": dataio.fnum(history["val_loss"][history["best_epoch"]]),
        "test_accuracy": dataio.fnum(
            gat.edge_accuracy(trained, graph, features, samples)),
    })
    return [transition_path, ckpt_path, manifest]


def stage_product(cfg: RunConfig) -> dict:
    """Diagnostic: build the product graph and report its arc structure."""
    graph, raw, _ = load_inputs(cfg)
    transition = dataio.read_transition(_out(cfg, "transition.csv"), graph)
    product = strong_product(graph, transition, raw.weeks)
    e, n, t = len(graph.edges), graph.n, raw.weeks
    return {
        "vertices": product.node_count,
        "arcs": product.arc_count,
        "expected_arcs": t * 2 * e + (t - 1) * (n + 2 * e),
    }


def stage_transform(cfg: RunConfig) -> list[str]:
    """Strong product -> Laplacian -> dictionary -> fast transform -> coefficients.csv."""
    _ensure_out(cfg)
    graph, raw, features = load_inputs(cfg)
    transition = dataio.read_transition(_out(cfg, "transition.csv"), graph)
    product = strong_product(graph, transition, raw.weeks)
    lap = laplacian(product)
    dictionary = sgwt.make_dictionary(
        lap.lambda_max_estimate,
        filters=cfg.sgwt.filters,
        scale_lo=cfg.sgwt.scale_lo,
        scale_hi=cfg.sgwt.scale_hi,
    )
    expansion = sgwt.expand_dictionary(dictionary, order=cfg.sgwt.cheb_order,
                                       quad_points=cfg.sgwt.quad_points)
    table = sgwt.cheb_apply(lap, features.vertex_signal(), expansion)

    coeff_path = _out(cfg, "coefficients.csv")
    dataio.write_coefficients(coeff_path, graph, raw.weeks, table)
    manifest = _manifest(cfg, "sgwt", {
        **cfg.resolved()["sgwt"],
        "lambda_max": dataio.fnum(lap.lambda_max_estimate),
        "scales": " ".join(dataio.fnum(s) for s in dictionary.scales),
        "weeks": raw.weeks,
        "vertices": product.node_count,
        "arcs": product.arc_count,
    })
    _manifest(cfg, "inputs", {
        "nodes_hash": dataio.content_hash(cfg.io.nodes),
        "edges_hash": dataio.content_hash(cfg.io.edges),
        "cases_hash": dataio.content_hash(cfg.io.cases),
    })
    return [coeff_path, manifest]


def stage_classify(cfg: RunConfig) -> list[str]:
    """Coefficients -> torque classes, anomaly metric, a-scores, slice classes."""
    _ensure_out(cfg)
    graph, raw, features = load_inputs(cfg)
    table = dataio.read_coefficients(_out(cfg, "coefficients.csv"), graph, raw.weeks,
                                     cfg.sgwt.filters)
    normalized = cl.log_normalize(cl.robust_scale(table))
    field = cl.classify_nodes(cl.torque(normalized))
    n, t = graph.n, raw.weeks
    sigma, slice_classes = cl.slice_classification(field.labels, n, t)
    theta = cl.anomaly_metric(features, graph)
    scores = cl.a_score(cl.label_grid(field.labels, n, t), theta,
                        cfg.classify.theta_hi, cfg.classify.theta_lo)

    classes_path = _out(cfg, "classes.csv")
    slices_path = _out(cfg, "slices.csv")
    dataio.write_classes(classes_path, graph, t, cl.label_grid(field.phi, n, t),
                         cl.label_grid(field.labels, n, t), theta, scores)
    dataio.write_slices(slices_path, sigma, slice_classes)
    manifest = _manifest(cfg, "classify", {
        **cfg.resolved()["classify"],
        "phi_min": dataio.fnum(field.phi_min),
        "phi_max": dataio.fnum(field.phi_max),
    })
    return [classes_path, slices_path, manifest]


def stage_rank(cfg: RunConfig, weeks: tuple[int, int] | None = None) -> list[str]:
    """Average a-scores over the window plus influential scores -> rankings.csv."""
    _ensure_out(cfg)
    graph, raw, _ = load_inputs(cfg)
    data = dataio.read_classes(_out(cfg, "classes.csv"), graph, raw.weeks)
    transition = dataio.read_transition(_out(cfg, "transition.csv"), graph)
    a_bar = cl.average_a_score(data["scores"], weeks)
    influential = gat.influential_scores(transition)
    least, most = cl.rank_nodes(a_bar)

    rankings_path = _out(cfg, "rankings.csv")
    dataio.write_rankings(rankings_path, graph, a_bar, influential, least, most)
    lo, hi = weeks if weeks is not None else (1, raw.weeks)
    manifest = _manifest(cfg, "rank", {"week_lo": lo, "week_hi": hi})
    return [rankings_path, manifest]


def stage_report(cfg: RunConfig, mask: bool = False,
                 week: int | None = None, top_k: int = 5) -> list[str]:
    """Render the SVG bundle from the classification and ranking files."""
    _ensure_out(cfg)
    graph, raw, _ = load_inputs(cfg)
    data = dataio.read_classes(_out(cfg, "classes.csv"), graph, raw.weeks)
    sigma, slice_classes = dataio.read_slices(_out(cfg, "slices.csv"))
    ranking = dataio.read_rankings(_out(cfg, "rankings.csv"), graph)

    if week is None:
        # deterministic default: the week with the most top-grade anomalies
        per_week = (data["scores"] == 4).sum(axis=0)
        week = int(np.argmax(per_week)) + 1
    if not 1 <= week <= raw.weeks:
        raise ValidationError(f"report week {week} outside 1..{raw.weeks}")
    hidden = downsample_mask(graph) if mask else set()

    written = []
    map_path = _out(cfg, f"map_classes_week{week}.svg")
    with open(map_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.render_map(graph, data["labels"][:, week - 1], week, hidden))
    written.append(map_path)

    slices_path = _out(cfg, "slices.svg")
    with open(slices_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.render_slices(sigma, slice_classes))
    written.append(slices_path)

    ranking_path = _out(cfg, "ranking.svg")
    with open(ranking_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.render_ranking(graph, ranking["a_bar"], ranking["least"],
                                       ranking["most"], top_k))
    written.append(ranking_path)
    written.append(_manifest(cfg, "report", {"week": week, "mask": mask, "top_k": top_k}))
    return written


_OUTPUT_NAMES = ("transition.csv", "gat_model.ckpt", "coefficients.csv",
                 "classes.csv", "slices.csv", "rankings.csv", "slices.svg",
                 "ranking.svg", MANIFEST_NAME)


def _remove_outputs(cfg: RunConfig) -> None:
    """Drop every pipeline artifact so a failed run leaves no stale mix."""
    if not os.path.isdir(cfg.io.out):
        return
    for name in os.listdir(cfg.io.out):
        if name in _OUTPUT_NAMES or (name.startswith("map_classes_week")
                                     and name.endswith(".svg")):
            os.remove(os.path.join(cfg.io.out, name))


def run_pipeline(cfg: RunConfig, weeks: tuple[int, int] | None = None,
                 mask: bool = False, week: int | None = None) -> list[str]:
    """Full run: train -> transform -> classify -> rank -> report.

    Any stage failure removes the pipeline's output files (including partial
    ones from the failing stage) and re-raises with the stage name attached.
    """
    os.makedirs(cfg.io.out, exist_ok=True)
    written: list[str] = []
    stages = [
        ("train", lambda: stage_train(cfg)),
        ("transform", lambda: stage_transform(cfg)),
        ("classify", lambda: stage_classify(cfg)),
        ("rank", lambda: stage_rank(cfg, weeks)),
        ("report", lambda: stage_report(cfg, mask, week)),
    ]
    for name, fn in stages:
        try:
            written.extend(fn())
        except Exception as exc:
            _remove_outputs(cfg)
            if isinstance(exc, StgwError):
                exc.args = (f"stage {name}: {exc}",)
                raise
            raise StgwError(f"stage {name}: {exc}") from exc
    return written
