"""Training protocol: full-batch runs with early stopping, and the seed grid.

The leakage boundary is structural: fit() receives only the training graph,
the features, and an opaque validation-scoring callback.  Held-out edges
enter through that callback and through evaluate(), never through the
training loop itself.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from . import models
from .graph import normalize_sym
from .metrics import MetricsReport, auc
from .splits import FeatureInit, init_features, sample_train_negatives

ENCODERS = ("sdgae", "digae", "mlp")
LOSSES = ("bce", "ce")


class TrainingError(RuntimeError):
    """A run aborted (non-finite loss or an infeasible sampling request)."""


@dataclass
class TrainConfig:
    encoder: str = "sdgae"
    decoder: str = "inner"
    loss: str = "bce"
    lr: float = 0.01
    wd: float = 0.0
    max_epochs: int = 2000
    patience: int = 200
    neg_strategy: str = "per_run"
    seed: int = 0
    hidden: int = 64
    emb: int = 64
    mlp_layers: int = 2
    k: int = 5
    alpha: float = 0.4
    beta: float = 0.4
    digae_layers: int = 1
    dec_hidden: int = 64

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.decoder not in models.DECODER_KINDS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.neg_strategy not in ("per_run", "per_epoch"):
            raise ValueError(f"unknown negative strategy {self.neg_strategy!r}")
        if not self.patience < self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")


def config_id(cfg):
    """Canonical config identity: every field, fixed order."""
    return ",".join(f"{k}={v}" for k, v in sorted(asdict(cfg).items()))


def _run_entropy(cfg, split_seed):
    # stable across processes: hash the canonical config string, mix the seeds
    digest = hashlib.sha256(config_id(cfg).encode()).digest()
    return [int.from_bytes(digest[:8], "little"), int(split_seed), int(cfg.seed)]


@dataclass
class TrainedModel:
    cfg: TrainConfig
    enc_params: object
    dec_params: models.DecoderKind
    ctx: object
    feats: np.ndarray

    def parameters(self):
        return list(self.named_parameters().values())

    def named_parameters(self):
        named = dict(self.enc_params.named_parameters())
        named.update(self.dec_params.named_parameters())
        return named

    def encode(self):
        return models.encoder_forward(self.enc_params, self.ctx, self.feats)

    def score_many(self, pair_groups):
        """Ranking scores for several pair arrays with a single encoder pass."""
        enc = self.encode()
        return [models.ranking_scores(self.dec_params, enc, pairs) for pairs in pair_groups]

    def score(self, pairs):
        return self.score_many([pairs])[0]


def build_model(cfg, train_graph, feats, rng):
    feats = np.asarray(feats, dtype=np.float64)
    in_dim = feats.shape[1]
    if cfg.encoder == "sdgae":
        enc = models.SdgaeParams.init(
            rng, in_dim, hidden=cfg.hidden, emb=cfg.emb, mlp_layers=cfg.mlp_layers, k=cfg.k
        )
        ctx = normalize_sym(train_graph)
    elif cfg.encoder == "digae":
        enc = models.DigaeParams.init(
            rng, in_dim, hidden=cfg.hidden, emb=cfg.emb, layers=cfg.digae_layers,
            alpha=cfg.alpha, beta=cfg.beta,
        )
        ctx = train_graph
    else:
        enc = models.MlpParams.init(rng, in_dim, hidden=cfg.hidden, emb=cfg.emb, layers=2)
        ctx = None
    out_dim = 1 if cfg.loss == "bce" else 2
    dec = models.DecoderKind.init(rng, cfg.decoder, cfg.emb, hidden=cfg.dec_hidden, out_dim=out_dim)
    return TrainedModel(cfg, enc, dec, ctx, feats)


@dataclass
class FitResult:
    model: TrainedModel
    loss_history: np.ndarray
    val_history: np.ndarray
    best_epoch: int
    best_val: float
    epochs_run: int


def fit(cfg, train_graph, feats, validation_scorer, split_seed=0):
    """Train on the training graph alone, early-stopping on the callback score.

    The callback receives score_many (pairs -> ranking scores) once per epoch
    after the optimizer step and returns a scalar to maximize.  Returns the
    model restored to its best-scoring epoch.
    """
    root = np.random.SeedSequence(_run_entropy(cfg, split_seed))
    init_ss, neg_ss = root.spawn(2)
    model = build_model(cfg, train_graph, feats, np.random.default_rng(init_ss))
    params = model.parameters()
    optimizer = ad.AdamState(params, lr=cfg.lr, weight_decay=cfg.wd)

    pos_pairs = train_graph.edges
    count = len(pos_pairs)
    neg_seed = int(neg_ss.generate_state(1)[0])
    labels = np.concatenate([np.ones(count), np.zeros(count)])
    classes = np.concatenate([np.zeros(count, np.int64), np.ones(count, np.int64)])

    negs = None
    if cfg.neg_strategy == "per_run":
        negs = sample_train_negatives(train_graph, count, neg_seed, "per_run")

    losses = []
    vals = []
    best_val = -np.inf
    best_epoch = 0
    best_state = None
    epoch = 0
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            if cfg.neg_strategy == "per_epoch":
                negs = sample_train_negatives(train_graph, count, neg_seed, "per_epoch", epoch)
            pairs = np.vstack([pos_pairs, negs])
            enc = model.encode()
            logits = models.decode(model.dec_params, enc, pairs)
            if cfg.loss == "bce":
                loss = ad.bce_with_logits(logits, labels)
            else:
                loss = ad.ce_pairwise(logits, classes)
            ad.backward(loss, params)
            optimizer.step()

            # a diverged model first shows up here as NaN ranking scores
            try:
                val = float(validation_scorer(model.score_many))
            except (FloatingPointError, ValueError) as exc:
                raise TrainingError(
                    f"aborted at epoch {epoch}: {exc} [{config_id(cfg)}]"
                ) from exc
            losses.append(float(loss.data[0, 0]))
            vals.append(val)
            if val > best_val:
                best_val = val
                best_epoch = epoch
                best_state = {name: t.data.copy() for name, t in model.named_parameters().items()}
            elif epoch - best_epoch >= cfg.patience:
                break
    except FloatingPointError as exc:
        raise TrainingError(f"aborted at epoch {epoch}: {exc} [{config_id(cfg)}]") from exc

    for name, t in model.named_parameters().items():
        t.data = best_state[name]
    return FitResult(
        model=model,
        loss_history=np.asarray(losses),
        val_history=np.asarray(vals),
        best_epoch=best_epoch,
        best_val=best_val,
        epochs_run=epoch,
    )


def make_validation_scorer(bundle):
    """Validation AUC callback over the bundle's validation pairs only."""
    val_pos = np.array(bundle.val_pos, dtype=np.int64)
    val_neg = np.array(bundle.val_neg, dtype=np.int64)

    def scorer(score_many):
        pos_scores, neg_scores = score_many([val_pos, val_neg])
        return auc(pos_scores, neg_scores)

    return scorer


def evaluate(model, bundle):
    """Score the held-out test pairs and compute all seven metrics."""
    pos_scores, neg_scores = model.score_many([bundle.test_pos, bundle.test_neg])
    return MetricsReport.from_scores(pos_scores, neg_scores)


@dataclass
class RunResult:
    cfg: TrainConfig
    split_seed: int
    loss_history: np.ndarray
    val_history: np.ndarray
    best_epoch: int
    best_val: float
    epochs_run: int
    seconds: float
    report: MetricsReport
    best_params: dict


def train_with_model(cfg, bundle, feats):
    """Full protocol on one split; returns the run record and the live model."""
    start = time.perf_counter()
    fitted = fit(cfg, bundle.train_graph, feats, make_validation_scorer(bundle), bundle.seed)
    report = evaluate(fitted.model, bundle)
    seconds = time.perf_counter() - start
    result = RunResult(
        cfg=cfg,
        split_seed=bundle.seed,
        loss_history=fitted.loss_history,
        val_history=fitted.val_history,
        best_epoch=fitted.best_epoch,
        best_val=fitted.best_val,
        epochs_run=fitted.epochs_run,
        seconds=seconds,
        report=report,
        best_params={n: t.data.copy() for n, t in fitted.model.named_parameters().items()},
    )
    return result, fitted.model


def train(cfg, bundle, feats):
    return train_with_model(cfg, bundle, feats)[0]


@dataclass
class GridRow:
    config: str
    split_seed: int
    status: str
    report: MetricsReport | None
    best_val: float
    epochs_run: int
    seconds: float
    error: str = ""


@dataclass
class GridSummary:
    config: str
    family: str
    n_runs: int
    n_failed: int
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    mean_val: float = float("nan")


@dataclass
class GridResult:
    rows: list
    summaries: list
    best_config: str
    best_by_family: dict = field(default_factory=dict)


def _grid_task(args):
    idx, cfg, bundle, feature_init, original = args
    feats = init_features(feature_init, bundle.train_graph, original)
    try:
        result = train(cfg, bundle, feats)
        return idx, GridRow(
            config=config_id(cfg),
            split_seed=bundle.seed,
            status="ok",
            report=result.report,
            best_val=result.best_val,
            epochs_run=result.epochs_run,
            seconds=result.seconds,
        )
    except TrainingError as exc:
        return idx, GridRow(
            config=config_id(cfg),
            split_seed=bundle.seed,
            status="failed",
            report=None,
            best_val=float("nan"),
            epochs_run=0,
            seconds=0.0,
            error=str(exc),
        )


def grid_run(configs, bundles, feature_init=None, original=None, workers=1):
    """Train every config on every bundle; aggregate mean and sample std.

    Failed runs are kept as flagged rows and excluded from aggregates, never
    silently averaged.  Output is independent of the worker count: results
    are keyed by (config, bundle) position, and every run seeds its own RNG
    streams from the config identity and the split seed.
    """
    if not configs or not bundles:
        raise ValueError("grid_run needs at least one config and one bundle")
    feature_init = feature_init or FeatureInit(mode="degrees")
    tasks = []
    for ci, cfg in enumerate(configs):
        for bi, bundle in enumerate(bundles):
            tasks.append(((ci, bi), cfg, bundle, feature_init, original))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_grid_task, tasks))
    else:
        results = dict(map(_grid_task, tasks))

    rows = [results[(ci, bi)] for ci in range(len(configs)) for bi in range(len(bundles))]
    summaries = []
    for ci, cfg in enumerate(configs):
        cfg_rows = [results[(ci, bi)] for bi in range(len(bundles))]
        ok = [r for r in cfg_rows if r.status == "ok"]
        summary = GridSummary(
            config=config_id(cfg),
            family=cfg.encoder,
            n_runs=len(cfg_rows),
            n_failed=len(cfg_rows) - len(ok),
        )
        if ok:
            for name in MetricsReport.FIELDS:
                vals = np.array([getattr(r.report, name) for r in ok])
                summary.mean[name] = float(vals.mean())
                summary.std[name] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            summary.mean_val = float(np.mean([r.best_val for r in ok]))
        summaries.append(summary)
    scored = [s for s in summaries if s.n_failed < s.n_runs]
    best = max(scored, key=lambda s: s.mean_val).config if scored else ""
    best_by_family = {}
    for s in scored:
        incumbent = best_by_family.get(s.family)
        if incumbent is None or s.mean_val > incumbent.mean_val:
            best_by_family[s.family] = s
    return GridResult(
        rows=rows,
        summaries=summaries,
        best_config=best,
        best_by_family={fam: s.config for fam, s in best_by_family.items()},
    )


RUN_COLUMNS = (
    "config", "dataset", "seed", "hits20", "hits50", "hits100",
    "mrr", "auc", "ap", "acc", "epochs", "seconds", "status",
)


def write_runs_tsv(path, rows, dataset):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(RUN_COLUMNS) + "\n")
        for r in rows:
            metric_cells = (
                [f"{getattr(r.report, name):.4f}" for name in MetricsReport.FIELDS]
                if r.report is not None
                else [""] * len(MetricsReport.FIELDS)
            )
            cells = [r.config, dataset, str(r.split_seed), *metric_cells,
                     str(r.epochs_run), f"{r.seconds:.3f}", r.status]
            fh.write("\t".join(cells) + "\n")


def write_summary_tsv(path, result, dataset):
    header = ["config", "dataset", "n_runs", "n_failed"]
    for name in MetricsReport.FIELDS:
        header += [f"{name}_mean", f"{name}_std"]
    header += ["val_auc_mean", "selected"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for s in result.summaries:
            cells = [s.config, dataset, str(s.n_runs), str(s.n_failed)]
            for name in MetricsReport.FIELDS:
                if s.mean:
                    cells += [f"{s.mean[name]:.4f}", f"{s.std[name]:.4f}"]
                else:
                    cells += ["", ""]
            cells += [f"{s.mean_val:.4f}", "1" if s.config == result.best_config else "0"]
            fh.write("\t".join(cells) + "\n")
