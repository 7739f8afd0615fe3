"""
Pipeline Runner

Executes one pipeline stage per call against a run directory:

    synth | ingest -> build-graph -> embed-nodes -> make-examples -> train
    -> embed -> classify | zdt | cata | eval | project

Each stage reads its inputs from the artifact store, checks they were
produced under the current configuration, writes its outputs and returns a
structured result:

    {"status": "ok", "stage": "...", "data": {...}}
    {"status": "error", "error_code": "...", "message": "...", "details": {...}}
"""

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from src.config import PipelineConfig
from src.downstream import (
    cata,
    knn_fit,
    knn_predict,
    rf_fit,
    rf_predict_proba,
    zdt_scores,
)
from src.errors import (
    ArtifactMismatchError,
    ConfigError,
    EmptyDatasetError,
    FlowEmbedError,
    PreconditionError,
)
from src.graph import (
    NodeEmbeddingTable,
    build_graph,
    embed_nodes,
    embed_unknown_ips,
    read_embedding_csv,
    read_graph_csv,
    write_embedding_csv,
    write_graph_csv,
)
from src.ingest import parse_flow_csv, sort_flows, split_train_test, write_flow_csv
from src.metrics import (
    classification_report,
    detection_metrics,
    embedding_report,
    pca3_projection,
    pr_curve,
)
from src.models import (
    CataResult,
    ClassificationReport,
    DatasetSplit,
    DetectionMetrics,
    Example,
    FlowDataset,
    ZdtResult,
)
from src.stpcn import (
    StpcnModel,
    embed_batch,
    load_model,
    read_embeddings_csv,
    save_model,
    train,
    write_embeddings_csv,
)
from src.synth import default_profiles, generate_dataset, load_profiles, save_profiles
from src.utils import ExperimentResult, RunReporter, get_logger
from src.windows import make_examples, read_examples, write_examples

from .artifacts import (
    CATA_COLUMNS,
    PR_COLUMNS,
    SWEEP_COLUMNS,
    ZDT_COLUMNS,
    ArtifactStore,
    cata_rows,
    file_digest,
    zdt_rows,
)

logger = get_logger(__name__)

STAGES = (
    "synth",
    "ingest",
    "build-graph",
    "embed-nodes",
    "make-examples",
    "train",
    "embed",
    "classify",
    "zdt",
    "cata",
    "eval",
    "project",
)

# Stages that take the holdout class recorded with the graph when none is configured
INHERITS_HOLDOUT = STAGES[STAGES.index("embed-nodes"):]


class PipelineRunner:
    """
    Stage dispatcher over one run directory.

    Stage methods raise FlowEmbedError subclasses; `run()` turns them into
    error result dicts.
    """

    def __init__(self, config: PipelineConfig, force: bool = False):
        self.base_config = config
        self.config = config
        self.store = ArtifactStore(config.out_dir, force=force)
        self._handlers: Dict[str, Callable[..., Dict[str, Any]]] = {
            "synth": self.synth,
            "ingest": self.ingest,
            "build-graph": self.build_graph,
            "embed-nodes": self.embed_nodes,
            "make-examples": self.make_examples,
            "train": self.train,
            "embed": self.embed,
            "classify": self.classify,
            "zdt": self.zdt,
            "cata": self.cata,
            "eval": self.evaluate,
            "project": self.project,
        }

    def run(self, stage: str, **options: Any) -> Dict[str, Any]:
        """
        Execute one stage.

        Args:
            stage: Subcommand name (see STAGES)
            **options: Stage-specific options; None values are dropped

        Returns:
            Structured ok/error result dict
        """
        handler = self._handlers.get(stage)
        if handler is None:
            return {
                "status": "error",
                "error_code": "UNKNOWN_STAGE",
                "message": f"Unknown stage '{stage}'; expected one of {', '.join(STAGES)}",
            }
        options = {key: value for key, value in options.items() if value is not None}
        with structlog.contextvars.bound_contextvars(stage=stage):
            self.config = self._resolve_holdout(stage)
            logger.info("config_resolved", config=self.config.resolved())
            try:
                self.config.write_resolved(self.store.out_dir)
                data = handler(**options)
            except FlowEmbedError as exc:
                logger.error("stage_failed", error_code=exc.error_code, message=exc.message)
                return exc.to_dict()
        logger.info("stage_finished")
        return {"status": "ok", "stage": stage, "data": data}

    # =========================================================================
    # Hashes and loaders
    # =========================================================================

    def _resolve_holdout(self, stage: str) -> PipelineConfig:
        """Fill an unset holdout from the one the run's graph was built with."""
        config = self.base_config
        if config.holdout is not None or stage not in INHERITS_HOLDOUT:
            return config
        recorded = self.store.recorded("graph", "holdout")
        if recorded is None:
            return config
        logger.info("holdout_resolved", holdout=recorded, source="graph")
        return config.model_copy(update={"holdout": recorded})

    def stage_hash(self, stage: str) -> str:
        return self.config.stage_hash(stage, upstream=self.store.digest("flows"))

    def _load_flows(self) -> FlowDataset:
        return parse_flow_csv(self.store.require("flows", self.store.digest("flows")))

    def _load_examples(self) -> List[Example]:
        path = self.store.require("examples", self.stage_hash("examples"))
        examples, gamma, epsilon = read_examples(path)
        if (gamma, epsilon) != (self.config.gamma, self.config.epsilon):
            raise ConfigError(
                f"Examples have gamma={gamma}, epsilon={epsilon}; configuration expects "
                f"gamma={self.config.gamma}, epsilon={self.config.epsilon}",
                gamma=gamma,
                epsilon=epsilon,
            )
        if not examples:
            raise EmptyDatasetError(f"No examples in {path}")
        return examples

    def _load_split(self) -> DatasetSplit:
        self.store.require("split", self.stage_hash("split"))
        return DatasetSplit.model_validate(self.store.read_json("split"))

    def _load_model(self) -> StpcnModel:
        expected = self.stage_hash("model")
        model = load_model(self.store.require("model", expected))
        if model.config_hash != expected and not self.store.force:
            raise ArtifactMismatchError(
                "Model header hash does not match the current configuration",
                artifact="model",
                recorded=model.config_hash,
                expected=expected,
            )
        return model

    def _load_embeddings(self) -> Tuple[List[int], List[str], np.ndarray]:
        return read_embeddings_csv(self.store.require("embeddings", self.stage_hash("embeddings")))

    def _effective_k(self, n_train: int) -> int:
        k = self.config.knn_k
        if k > n_train:
            logger.warning("knn_k_clamped", requested=k, n_train=n_train)
            return n_train
        return k

    def _holdout_schedule(self, classes: Sequence[str], repeats: int) -> List[str]:
        """Holdout class per repeat: a seeded shuffle of the labels, cycled."""
        rng = np.random.default_rng(self.config.seed)
        order = [classes[i] for i in rng.permutation(len(classes))]
        return [order[r % len(order)] for r in range(repeats)]

    # =========================================================================
    # Data stages
    # =========================================================================

    def synth(self, profiles: Optional[str] = None) -> Dict[str, Any]:
        cfg = self.config
        profile_path = profiles or cfg.profiles
        class_profiles = (
            load_profiles(profile_path) if profile_path else default_profiles(cfg.synth_classes)
        )
        dataset = generate_dataset(class_profiles, cfg.flows_per_class, cfg.seed, beta=cfg.beta)
        flows_path = write_flow_csv(dataset.records, self.store.path("flows"))
        self.store.record("flows", file_digest(flows_path))
        save_profiles(class_profiles, self.store.path("profiles"))
        self.store.record("profiles", cfg.stage_hash("synth"))
        return {"flows": len(dataset), "classes": dataset.classes, "path": str(flows_path)}

    def ingest(self, input_path: Optional[str] = None) -> Dict[str, Any]:
        source = input_path or self.config.input_flows
        if source is None:
            raise ConfigError("No input flow file; pass a path or set input_flows", key="input_flows")
        dataset = sort_flows(parse_flow_csv(source))
        flows_path = write_flow_csv(dataset.records, self.store.path("flows"))
        self.store.record("flows", file_digest(flows_path))
        return {"flows": len(dataset), "classes": dataset.classes, "path": str(flows_path)}

    def build_graph(self) -> Dict[str, Any]:
        holdout = self.config.holdout
        training, held = self._load_flows().partition(holdout)
        if holdout is not None and not len(held):
            logger.warning("holdout_class_has_no_flows", holdout=holdout)
        graph = build_graph(training, self.config.edge_params())
        path = write_graph_csv(graph, self.store.path("graph"))
        self.store.record("graph", self.stage_hash("graph"), holdout=holdout)
        return {
            "nodes": graph.n_nodes,
            "edges": graph.n_edges,
            "holdout_class": holdout,
            "excluded_flows": len(held),
            "path": str(path),
        }

    def embed_nodes(self) -> Dict[str, Any]:
        graph = read_graph_csv(self.store.require("graph", self.stage_hash("graph")))
        table = embed_nodes(graph, self.config.fastrp_config())
        path = write_embedding_csv(table, self.store.path("nodes"))
        self.store.record("nodes", self.stage_hash("nodes"))
        return {"nodes": len(table), "epsilon": table.epsilon, "path": str(path)}

    def make_examples(self) -> Dict[str, Any]:
        cfg = self.config
        table = read_embedding_csv(self.store.require("nodes", self.stage_hash("nodes")))
        examples, fresh = self._build_examples(self._load_flows(), cfg.holdout, table)
        if not examples:
            raise EmptyDatasetError(
                f"No class stream has at least beta={cfg.beta} flows; no examples built",
                beta=cfg.beta,
            )
        path = write_examples(examples, self.store.path("examples"), cfg.gamma, cfg.epsilon)
        self.store.record("examples", self.stage_hash("examples"))
        counts: Dict[str, int] = {}
        for example in examples:
            counts[example.label] = counts.get(example.label, 0) + 1
        return {
            "examples": len(examples),
            "per_class": counts,
            "fresh_ips": fresh,
            "path": str(path),
        }

    def _build_examples(
        self,
        flows: FlowDataset,
        holdout: Optional[str],
        table: Optional[NodeEmbeddingTable] = None,
    ) -> Tuple[List[Example], int]:
        """
        Examples of every class over node vectors from the non-holdout graph.

        Without a stored `table` the graph and FastRP run in memory. Holdout
        IPs missing from the table follow `unknown_ip_policy`.

        Returns:
            (examples, number of IPs embedded fresh)
        """
        cfg = self.config
        training, held = flows.partition(holdout)
        if table is None:
            table = embed_nodes(build_graph(training, cfg.edge_params()), cfg.fastrp_config())
        added: List[str] = []
        if holdout is not None and len(held) and cfg.unknown_ip_policy == "fresh":
            table, added = embed_unknown_ips(held, table, cfg.fastrp_config(), cfg.edge_params())
        return make_examples(flows, table, cfg.window_config()), len(added)

    # =========================================================================
    # Model stages
    # =========================================================================

    def train(self) -> Dict[str, Any]:
        cfg = self.config
        examples = self._load_examples()
        split = split_train_test(examples, cfg.split_ratio, cfg.seed, cfg.holdout)
        self.store.write_json("split", split.model_dump())
        self.store.record("split", self.stage_hash("split"))

        model, log = train(examples, split, cfg.train_config())
        model.config_hash = self.stage_hash("model")
        path = save_model(model, self.store.path("model"))
        self.store.record("model", model.config_hash)
        self.store.write_json("train_log", log.model_dump())
        self.store.record("train_log", model.config_hash)
        return {
            "classes": model.classes,
            "holdout_class": split.holdout_class,
            "n_train": len(split.train),
            "n_test": len(split.test),
            "n_holdout": len(split.holdout),
            "final_loss": log.losses[-1],
            "path": str(path),
        }

    def embed(self, flows: Optional[str] = None) -> Dict[str, Any]:
        model = self._load_model()
        if flows is not None:
            return self._embed_new_flows(model, flows)

        examples = self._load_examples()
        if (model.gamma, model.epsilon) != (examples[0].gamma, examples[0].epsilon):
            raise ConfigError(
                f"Model expects gamma={model.gamma}, epsilon={model.epsilon}; examples have "
                f"gamma={examples[0].gamma}, epsilon={examples[0].epsilon}"
            )
        vectors = embed_batch(model, examples)
        path = write_embeddings_csv(
            vectors, [example.label for example in examples], self.store.path("embeddings")
        )
        self.store.record("embeddings", self.stage_hash("embeddings"))
        return {"examples": len(examples), "dim": int(vectors.shape[1]), "path": str(path)}

    def _embed_new_flows(self, model: StpcnModel, flows: str) -> Dict[str, Any]:
        """Embed windows of a new flow file against the stored node table."""
        cfg = self.config
        dataset = sort_flows(parse_flow_csv(flows))
        table = read_embedding_csv(self.store.require("nodes", self.stage_hash("nodes")))
        added: List[str] = []
        if cfg.unknown_ip_policy == "fresh":
            table, added = embed_unknown_ips(dataset, table, cfg.fastrp_config(), cfg.edge_params())
        examples = make_examples(dataset, table, cfg.window_config())
        if not examples:
            raise EmptyDatasetError(f"No window of beta={cfg.beta} flows in {flows}", beta=cfg.beta)
        vectors = embed_batch(model, examples)
        path = write_embeddings_csv(
            vectors, [example.label for example in examples], self.store.path("inference_embeddings")
        )
        self.store.record(
            "inference_embeddings",
            cfg.stage_hash("embeddings", upstream=file_digest(flows)),
        )
        return {
            "examples": len(examples),
            "unknown_ips": sum(example.unknown_ips for example in examples),
            "fresh_ips": len(added),
            "policy": cfg.unknown_ip_policy,
            "path": str(path),
        }

    # =========================================================================
    # Downstream stages
    # =========================================================================

    def _forest_report(
        self,
        vectors: np.ndarray,
        labels: Sequence[str],
        train_idx: Sequence[int],
        test_idx: Sequence[int],
    ) -> ClassificationReport:
        forest = rf_fit(vectors[list(train_idx)], [labels[i] for i in train_idx], self.config.forest_config())
        probs = rf_predict_proba(forest, vectors[list(test_idx)])
        predicted = [forest.classes[j] for j in probs.argmax(axis=1)]
        return classification_report(
            [labels[i] for i in test_idx], predicted, probs, forest.classes
        )

    def classify(self, with_holdout: bool = False, repeats: Optional[int] = None) -> Dict[str, Any]:
        if not with_holdout:
            _, labels, vectors = self._load_embeddings()
            split = self._load_split()
            report = self._forest_report(vectors, labels, split.train, split.test)
            payload: Dict[str, Any] = {"mode": "single", "report": report.model_dump()}
            self.store.write_json("classify", payload)
            return {"macro": report.macro.model_dump(), "minimum": report.minimum.model_dump()}

        cfg = self.config
        repeats = repeats or cfg.repeats
        examples = self._load_examples()
        labels = [example.label for example in examples]
        classes = sorted(set(labels))
        if len(classes) < 3:
            raise PreconditionError(
                f"Repeated holdout needs at least 3 classes, found {len(classes)}", classes=classes
            )
        flows = self._load_flows()
        runs = []
        for repeat, holdout in enumerate(self._holdout_schedule(classes, repeats)):
            seed = cfg.seed + repeat
            scoped, _ = self._build_examples(flows, holdout)
            split = split_train_test(scoped, cfg.split_ratio, seed, holdout)
            held = split_train_test([scoped[i] for i in split.holdout], cfg.split_ratio, seed)
            held_train = [split.holdout[i] for i in held.train]
            held_test = [split.holdout[i] for i in held.test]

            model, _ = train(scoped, split, cfg.train_config().model_copy(update={"seed": seed}))
            vectors = embed_batch(model, scoped)
            report = self._forest_report(
                vectors, labels, split.train + held_train, split.test + held_test
            )
            logger.info(
                "holdout_repeat_finished",
                repeat=repeat,
                holdout_class=holdout,
                macro_precision=round(report.macro.precision, 4),
                macro_recall=round(report.macro.recall, 4),
            )
            runs.append({"repeat": repeat, "holdout_class": holdout, "report": report.model_dump()})

        aggregate = {
            summary: {
                metric: float(np.mean([run["report"][summary][metric] for run in runs]))
                for metric in ("precision", "recall", "auc")
            }
            for summary in ("macro", "minimum")
        }
        self.store.write_json(
            "classify", {"mode": "repeated_holdout", "repeats": runs, "aggregate": aggregate}
        )
        return {"repeats": len(runs), "aggregate": aggregate}

    def _zdt_experiment(
        self, vectors: np.ndarray, labels: Sequence[str], split: DatasetSplit
    ) -> Tuple[List[int], ZdtResult, DetectionMetrics, List[Tuple[float, float, float]], CataResult]:
        if split.holdout_class is None or not split.holdout:
            raise PreconditionError(
                "Zero-day detection needs a holdout class; train with --holdout LABEL"
            )
        knn = knn_fit(
            vectors[split.train],
            [labels[i] for i in split.train],
            self._effective_k(len(split.train)),
        )
        queries = list(split.test) + list(split.holdout)
        truth = [False] * len(split.test) + [True] * len(split.holdout)
        threshold = self.config.zdt_threshold
        result = zdt_scores(knn, vectors[queries], truth, threshold)
        detection = detection_metrics(truth, result.zdt_probability, threshold)
        curve = pr_curve(truth, result.zdt_probability)
        attribution = cata(knn, vectors[split.holdout], split.holdout_class)
        return queries, result, detection, curve, attribution

    def zdt(self, repeats: Optional[int] = None) -> Dict[str, Any]:
        if repeats is not None:
            return self._zdt_sweep(repeats)

        _, labels, vectors = self._load_embeddings()
        split = self._load_split()
        queries, result, detection, curve, attribution = self._zdt_experiment(vectors, labels, split)
        self.store.write_rows("zdt", zdt_rows(result, queries), ZDT_COLUMNS)
        self.store.write_rows(
            "pr_curve",
            [dict(zip(PR_COLUMNS, row)) for row in curve],
            PR_COLUMNS,
        )
        self.store.write_rows("cata", cata_rows(attribution), CATA_COLUMNS)

        reporter = RunReporter("Zero-day threat detection", self.stage_hash("embeddings"))
        reporter.add_experiment(
            ExperimentResult(
                name=f"Holdout {split.holdout_class}",
                description="KNN zero-day probability over test and holdout embeddings",
                metrics=detection.model_dump(),
                table=cata_rows(attribution),
            )
        )
        reporter.write(self.store.path("report"))
        return {"holdout_class": split.holdout_class, **detection.model_dump()}

    def _zdt_sweep(self, repeats: int) -> Dict[str, Any]:
        """Retrain once per holdout class and tabulate detection and attribution."""
        cfg = self.config
        examples = self._load_examples()
        labels = [example.label for example in examples]
        classes = sorted(set(labels))
        if len(classes) < 3:
            raise PreconditionError(
                f"Holdout sweep needs at least 3 classes, found {len(classes)}", classes=classes
            )
        flows = self._load_flows()
        holdouts = list(dict.fromkeys(self._holdout_schedule(classes, repeats)))
        rows = []
        for holdout in holdouts:
            scoped, _ = self._build_examples(flows, holdout)
            split = split_train_test(scoped, cfg.split_ratio, cfg.seed, holdout)
            model, _ = train(scoped, split, cfg.train_config())
            vectors = embed_batch(model, scoped)
            _, _, detection, _, attribution = self._zdt_experiment(vectors, labels, split)
            top = attribution.entries[0]
            rows.append(
                {
                    "holdout_class": holdout,
                    "pr_auc": detection.pr_auc,
                    "precision": detection.precision,
                    "recall": detection.recall,
                    "cata_top1": top.attributed_class,
                    "cata_top1_probability": top.avg_probability,
                }
            )
        average = {
            "holdout_class": "average",
            **{
                metric: float(np.mean([row[metric] for row in rows]))
                for metric in ("pr_auc", "precision", "recall", "cata_top1_probability")
            },
            "cata_top1": "",
        }
        self.store.write_rows("zdt_sweep", rows + [average], SWEEP_COLUMNS)

        reporter = RunReporter("Zero-day holdout sweep", cfg.stage_hash("examples"))
        reporter.add_experiment(
            ExperimentResult(
                name="Holdout sweep",
                description="One ST-PCN per holdout class; KNN zero-day detection and CATA",
                table=rows + [average],
            )
        )
        reporter.write(self.store.path("report"))
        return {
            "holdouts": holdouts,
            "average": {key: value for key, value in average.items() if key != "holdout_class"},
        }

    def cata(self) -> Dict[str, Any]:
        _, labels, vectors = self._load_embeddings()
        split = self._load_split()
        if split.holdout_class is None or not split.holdout:
            raise PreconditionError("Attribution needs a holdout class; train with --holdout LABEL")
        knn = knn_fit(
            vectors[split.train],
            [labels[i] for i in split.train],
            self._effective_k(len(split.train)),
        )
        attribution = cata(knn, vectors[split.holdout], split.holdout_class)
        self.store.write_rows("cata", cata_rows(attribution), CATA_COLUMNS)
        return attribution.model_dump()

    def evaluate(self, cluster_mode: Optional[str] = None) -> Dict[str, Any]:
        cfg = self.config
        mode = cluster_mode or cfg.cluster_mode
        _, labels, vectors = self._load_embeddings()
        split = self._load_split()
        test_vectors = vectors[split.test]
        test_labels = [labels[i] for i in split.test]

        predicted = None
        if mode == "truth":
            knn = knn_fit(
                vectors[split.train],
                [labels[i] for i in split.train],
                self._effective_k(len(split.train)),
            )
            predicted = knn_predict(knn, test_vectors)

        classification = self._forest_report(vectors, labels, split.train, split.test)
        detection = None
        if split.holdout_class is not None and split.holdout:
            _, _, detection, _, _ = self._zdt_experiment(vectors, labels, split)

        report = embedding_report(
            test_vectors,
            test_labels,
            cluster_mode=mode,
            predicted=predicted,
            seed=cfg.seed,
            classification=classification,
            detection=detection,
        )
        path = self.store.path("metrics")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.to_json() + "\n", encoding="utf-8")

        reporter = RunReporter("Embedding evaluation", self.stage_hash("embeddings"))
        reporter.add_experiment(
            ExperimentResult(
                name="Test-set clustering quality",
                description=f"Silhouette on truth labels; agreement scores in {mode} mode",
                metrics=report.model_dump(exclude={"classification", "detection"}),
            )
        )
        reporter.add_experiment(
            ExperimentResult(
                name="Random forest on test embeddings",
                description="Macro and minimum per-class precision, recall and ROC AUC",
                table=[
                    {"summary": "macro", **classification.macro.model_dump()},
                    {"summary": "minimum", **classification.minimum.model_dump()},
                ],
            )
        )
        if detection is not None:
            reporter.add_experiment(
                ExperimentResult(
                    name=f"Zero-day detection ({split.holdout_class})",
                    description="KNN zero-day probability over test and holdout embeddings",
                    metrics=detection.model_dump(),
                )
            )
        reporter.write(self.store.path("report"))
        return report.model_dump()

    def project(self) -> Dict[str, Any]:
        ids, labels, vectors = self._load_embeddings()
        coords = pca3_projection(vectors)
        rows = [
            {"example_id": i, "label": label, "x": c[0], "y": c[1], "z": c[2]}
            for i, label, c in zip(ids, labels, coords)
        ]
        path = self.store.write_rows("projection", rows, ("example_id", "label", "x", "y", "z"))
        return {"points": len(rows), "path": str(path)}
