"""The pipeline commands: every function reads and writes one run directory."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.data.synthetic import make_synthetic_scenes
from src.data.trajectories import (
    DatasetSplit,
    NegativeWindow,
    RawTrackTable,
    leave_one_out_split,
    load_negatives,
    load_raw_scene,
    load_windows,
    make_negatives,
    save_raw_scene,
    save_windows,
    window_scenes,
    windows_digest,
)
from src.db.run_store import RunPaths, read_json, require, sha256_of, write_json
from src.errors import ConfigurationError, EmptyInputError, FormatError, NumericError
from src.model.space import TADSpec, decode, encode, manual_presets, parse_sequence
from src.model.tad_model import TADModel, build_from_config, load_checkpoint, save_checkpoint
from src.schemas.config_loader import dump_run_config
from src.schemas.pydantic_schemas import (
    MetricReport,
    RunConfig,
    SamplerKind,
    SearchRecord,
    SplitManifest,
    Strategy,
)
from src.search.runner import (
    CandidateEvaluator,
    SearchResult,
    best_record,
    load_history,
    random_search,
    run_search,
    search_curve,
    validation_auc,
)
from src.services import plots
from src.tpeval.filtering import (
    WindowEvaluation,
    evaluate_scene,
    filtering_win_rate,
    num_samples_sweep,
    oracle_scorer,
    per_window_reports,
    psi_sweep,
    score_matrix,
)
from src.tpeval.reports import auc_table, format_report_table, merge_auc_tables, metric_rows, write_table
from src.tpsim.samplers import generate_samples, load_samples, save_samples, train_recurrent_sampler

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
PARTS = ("train", "val", "val_neg", "test")


def run_paths(config: RunConfig) -> RunPaths:
    return RunPaths(Path(config.run_dir))


# --- 1. prepare / make-negatives ---

def _load_scenes(config: RunConfig, paths: RunPaths) -> Dict[str, RawTrackTable]:
    if config.scenes:
        return {name: load_raw_scene(path, config.columns, name) for name, path in sorted(config.scenes.items())}
    scenes = make_synthetic_scenes(
        config.synthetic_scenes, config.synthetic_frames, config.synthetic_pedestrians, config.seed
    )
    paths.raw_dir.mkdir(parents=True, exist_ok=True)
    for name, table in scenes.items():
        save_raw_scene(table, paths.raw_dir / f"{name}.txt", config.columns)
    return scenes


def prepare(config: RunConfig) -> SplitManifest:
    """Scenes -> windows -> leave-one-out split, cached under data/ with a checksummed manifest."""
    paths = run_paths(config)
    dump_run_config(config, paths.config)
    scenes = _load_scenes(config, paths)
    held_out = config.held_out or sorted(scenes)[-1]
    if held_out not in scenes:
        raise ConfigurationError(f"unknown held-out scene {held_out!r}; known: {sorted(scenes)}")

    windows = {
        name: window_scenes(table, config.t_obs, config.t_pred, config.window_stride)
        for name, table in scenes.items()
    }
    split = leave_one_out_split(windows, held_out, config.val_fraction, config.seed, config.noise_bound)
    if not split.test:
        raise EmptyInputError(
            f"held-out scene {held_out!r} has no pedestrian present for {config.t_obs + config.t_pred} frames"
        )

    paths.data_dir.mkdir(parents=True, exist_ok=True)
    save_windows(split.train, paths.windows("train"))
    save_windows(split.val, paths.windows("val"))
    save_windows(split.val, paths.windows("val_neg"), futures=[n.future for n in split.val_neg])
    save_windows(split.test, paths.windows("test"))

    checksums = {part: windows_digest(paths.windows(part)) for part in PARTS}
    if config.scenes:
        checksums.update({f"scene:{name}": sha256_of(Path(path)) for name, path in config.scenes.items()})
    manifest = SplitManifest(
        held_out_scene=held_out,
        scenes=sorted(scenes),
        seed=config.seed,
        noise_bound=config.noise_bound,
        val_fraction=config.val_fraction,
        t_obs=config.t_obs,
        t_pred=config.t_pred,
        window_stride=config.window_stride,
        counts={
            "train": len(split.train), "val": len(split.val),
            "val_neg": len(split.val_neg), "test": len(split.test),
        },
        checksums=checksums,
        format_version=MANIFEST_VERSION,
    )
    write_json(paths.manifest, manifest.model_dump(mode="json"))
    logger.info(
        f"Prepared split holding out {held_out}: {len(split.train)} train, {len(split.val)} val, "
        f"{len(split.test)} test windows"
    )
    return manifest


def read_manifest(config: RunConfig) -> SplitManifest:
    paths = run_paths(config)
    manifest = SplitManifest(**read_json(require(paths.manifest, "tpad prepare")))
    if (manifest.t_obs, manifest.t_pred) != (config.t_obs, config.t_pred):
        raise ConfigurationError(
            f"cached windows use t_obs={manifest.t_obs}, t_pred={manifest.t_pred}; "
            f"config asks for {config.t_obs}, {config.t_pred}. Re-run `tpad prepare`"
        )
    return manifest


def regenerate_negatives(config: RunConfig) -> List[NegativeWindow]:
    """Redraw the perturbed validation futures with the configured noise bound and seed."""
    paths = run_paths(config)
    manifest = read_manifest(config)
    val = load_windows(require(paths.windows("val"), "tpad prepare"))
    negatives = make_negatives(val, config.noise_bound, config.seed)
    save_windows(val, paths.windows("val_neg"), futures=[n.future for n in negatives])
    checksums = {**manifest.checksums, "val_neg": windows_digest(paths.windows("val_neg"))}
    manifest = manifest.model_copy(update={"noise_bound": config.noise_bound, "checksums": checksums})
    write_json(paths.manifest, manifest.model_dump(mode="json"))
    logger.info(f"Wrote {len(negatives)} negative windows (noise bound {config.noise_bound})")
    return negatives


def load_split(config: RunConfig) -> DatasetSplit:
    paths = run_paths(config)
    manifest = read_manifest(config)
    val = load_windows(require(paths.windows("val"), "tpad prepare"))
    return DatasetSplit(
        train=load_windows(require(paths.windows("train"), "tpad prepare")),
        val=val,
        val_neg=load_negatives(require(paths.windows("val_neg"), "tpad prepare"), val, manifest.noise_bound),
        held_out_scene=manifest.held_out_scene,
        test=load_windows(require(paths.windows("test"), "tpad prepare")),
    )


# --- 2. search ---

def search(config: RunConfig, progress: bool = False) -> SearchResult:
    split = load_split(config)
    paths = run_paths(config)
    result = run_search(CandidateEvaluator(split, config), config, paths.root, progress=progress)
    plots.plot_search_curves({result.best.strategy.value: search_curve(result.history)}, paths.plot("search_curve.png"))
    logger.info(f"Best candidate {result.best.index}: AUC {result.best.reward:.4f}, sequence {result.best.sequence}")
    return result


def random_baseline(config: RunConfig, split: DatasetSplit, progress: bool = False) -> SearchRecord:
    """Best record of a random search with the same budget (the main history when it already is one)."""
    paths = run_paths(config)
    if config.strategy == Strategy.RANDOM:
        require(paths.history, "tpad search")
        return best_record(load_history(paths.root))
    result = random_search(CandidateEvaluator(split, config), config, paths.random_baseline.root, progress)
    return result.best


# --- 3. train-final ---

def resolve_spec(config: RunConfig) -> Tuple[str, TADSpec]:
    """(label, spec) from `spec`, then `preset`, then the best record of the search."""
    if config.spec:
        return "explicit", decode(parse_sequence(config.spec))
    if config.preset:
        presets = manual_presets()
        if config.preset not in presets:
            raise ConfigurationError(f"unknown preset {config.preset!r}; known: {sorted(presets)}")
        return config.preset, presets[config.preset]
    record = SearchRecord(**read_json(require(run_paths(config).best_spec, "tpad search")))
    return "searched", decode(record.sequence)


def held_out_auc(model: TADModel, split: DatasetSplit, config: RunConfig) -> float:
    """AUC on the held-out scene against its own perturbed futures."""
    negatives = make_negatives(split.test, config.noise_bound, config.seed)
    return validation_auc(model.score_window, split.test, negatives)


def train_model(spec: TADSpec, split: DatasetSplit, config: RunConfig, progress: bool = False) -> TADModel:
    model = build_from_config(spec, config)
    model.fit(split.train, config.final_epochs, lr=config.model_lr, seed=config.seed, progress=progress)
    return model


def train_final(config: RunConfig, progress: bool = False) -> Dict:
    paths = run_paths(config)
    split = load_split(config)
    label, spec = resolve_spec(config)
    logger.info(f"Training the {label} model for {config.final_epochs} epochs")
    model = train_model(spec, split, config, progress)
    save_checkpoint(model, paths.final_model)

    report = {
        "model": label,
        "sequence": encode(spec),
        "epochs": model.epochs_trained,
        "final_loss": model.loss_history[-1] if model.loss_history else None,
        "val_auc": validation_auc(model.score_window, split.val, split.val_neg),
        "test_auc": held_out_auc(model, split, config),
        "held_out_scene": split.held_out_scene,
    }
    write_json(paths.report("final_auc.json"), report)
    write_table(auc_table({label: report["test_auc"]}, split.held_out_scene), paths.report("auc.csv"))
    logger.info(f"Validation AUC {report['val_auc']:.4f}, held-out AUC {report['test_auc']:.4f}")
    return report


# --- 4. score / filter ---

def _sample_path(config: RunConfig, paths: RunPaths, index: int) -> Path:
    if config.samples_dir:
        return Path(config.samples_dir) / paths.sample_file(index).name
    return paths.sample_file(index)


def score(config: RunConfig, progress: bool = False) -> Dict[str, np.ndarray]:
    """Sample (or load) Ψ predictions per held-out window and score them into N x Ψ matrices."""
    paths = run_paths(config)
    split = load_split(config)
    model = None if config.oracle_scorer else load_checkpoint(require(paths.final_model, "tpad train-final"))

    total = max([config.num_samples, *config.num_samples_sweep])
    sampler_config = config.sampler_config(total)
    recurrent = None
    if not config.samples_dir and config.sampler == SamplerKind.RECURRENT_GAUSSIAN:
        recurrent = train_recurrent_sampler(
            split.train, config.sampler_epochs, config.seed, progress=progress
        )

    matrices: Dict[str, np.ndarray] = {}
    windows = tqdm(split.test, desc="score", leave=False) if progress else split.test
    for index, window in enumerate(windows):
        if config.samples_dir:
            sample_set = load_samples(_sample_path(config, paths, index))
        else:
            sample_set = generate_samples(window.history, sampler_config, config.t_pred, recurrent, config.seed + index)
            save_samples(sample_set, paths.sample_file(index))
        if sample_set.samples.shape[1:] != window.future.shape:
            raise FormatError(
                f"samples of window {index} have shape {sample_set.samples.shape[1:]}, "
                f"window future is {window.future.shape}"
            )
        scorer = oracle_scorer(window.future) if model is None else model
        matrices[f"window_{index:05d}"] = score_matrix(scorer, sample_set, window.history)

    paths.samples_dir.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(paths.scores, oracle=np.array(config.oracle_scorer), **matrices)
    logger.info(f"Scored {len(matrices)} held-out windows ({'oracle' if model is None else 'model'} scores)")
    return matrices


def load_evaluations(config: RunConfig) -> Tuple[List[WindowEvaluation], bool]:
    """Per-window (samples, truth, scores) of the held-out scene, and whether scores are oracle ADEs."""
    paths = run_paths(config)
    test = load_windows(require(paths.windows("test"), "tpad prepare"))
    evaluations = []
    with np.load(require(paths.scores, "tpad score")) as blob:
        oracle = bool(blob["oracle"])
        for index, window in enumerate(test):
            key = f"window_{index:05d}"
            if key not in blob.files:
                raise FormatError(f"{paths.scores} has no scores for {key}; re-run `tpad score`")
            sample_set = load_samples(_sample_path(config, paths, index))
            scores = blob[key]
            if scores.shape != (sample_set.num_pedestrians, sample_set.num_samples):
                raise FormatError(f"{key}: score matrix {scores.shape} does not match its samples")
            evaluations.append(WindowEvaluation(sample_set, window.future, scores))
    return evaluations, oracle


def _scorer_label(config: RunConfig, oracle: bool) -> str:
    if oracle:
        return "oracle"
    return "external" if config.samples_dir else config.sampler.value


def filter_predictions(config: RunConfig) -> Tuple[MetricReport, MetricReport]:
    """Top-ψ of Ψ per pedestrian; writes the side-by-side unfiltered / filtered report."""
    if config.top_k > config.num_samples:
        raise ConfigurationError(f"top_k ψ={config.top_k} exceeds num_samples Ψ={config.num_samples}")
    paths = run_paths(config)
    manifest = read_manifest(config)
    evaluations, oracle = load_evaluations(config)
    available = min(e.samples.num_samples for e in evaluations)
    if available < config.num_samples:
        raise ConfigurationError(f"num_samples Ψ={config.num_samples} but the sample files hold only {available}")
    evaluations = [e.head(config.num_samples) for e in evaluations]

    full, filtered = evaluate_scene(evaluations, config.top_k, config.best_mode, config.worst_mode)
    label = _scorer_label(config, oracle)
    scene = manifest.held_out_scene
    write_table(format_report_table(metric_rows(label, full, filtered, config.top_k), scene), paths.report("filter.csv"))
    windows = pd.DataFrame(per_window_reports(evaluations, config.top_k)).set_index("window")
    write_table(windows, paths.report("filter_windows.csv"))
    write_json(paths.report("filter.json"), {
        "scene": scene,
        "scorer": label,
        "psi": config.top_k,
        "num_samples": config.num_samples,
        "windows": len(evaluations),
        "win_rate": filtering_win_rate(evaluations, config.top_k),
        "all": full.model_dump(),
        "top": filtered.model_dump(),
    })
    logger.info(
        f"Average ADE {full.average_ade:.3f} over all {config.num_samples} samples, "
        f"{filtered.average_ade:.3f} over the top {config.top_k}"
    )
    return full, filtered


# --- 5. eval / plot ---

def _held_out_auc_or_nan(name: str, config: RunConfig, split: DatasetSplit, model: Optional[TADModel] = None,
                          spec: Optional[TADSpec] = None, progress: bool = False) -> float:
    """Held-out AUC of `model`, or of `spec` trained first; NaN when training or scoring diverges."""
    try:
        if model is None:
            model = train_model(spec, split, config, progress)
        return held_out_auc(model, split, config)
    except NumericError as e:
        logger.warning(f"{name}: no AUC ({e.detail})")
        return float("nan")


def compare_models(config: RunConfig, progress: bool = False) -> pd.DataFrame:
    """Held-out AUC of the final model, the manual presets, the random-search best and an untrained scorer."""
    paths = run_paths(config)
    split = load_split(config)
    final = load_checkpoint(require(paths.final_model, "tpad train-final"))
    summary = paths.report("final_auc.json")
    label = read_json(summary)["model"] if summary.exists() else "final"

    aucs: Dict[str, float] = {label: _held_out_auc_or_nan(label, config, split, model=final)}
    for name, spec in manual_presets().items():
        if name != label:
            aucs[name] = _held_out_auc_or_nan(name, config, split, spec=spec, progress=progress)
    record = random_baseline(config, split, progress)
    aucs["random-search"] = _held_out_auc_or_nan(
        "random-search", config, split, spec=decode(record.sequence), progress=progress
    )
    aucs["untrained"] = _held_out_auc_or_nan("untrained", config, split, model=build_from_config(final.spec, config))

    table = auc_table(aucs, split.held_out_scene)
    write_table(table, paths.report("auc_comparison.csv"))
    return table


def sensitivity_sweeps(config: RunConfig) -> Dict[str, pd.DataFrame]:
    """ψ and Ψ sensitivity tables over the scored held-out windows."""
    paths = run_paths(config)
    evaluations, _ = load_evaluations(config)
    sweeps = {
        "psi_sweep": psi_sweep(evaluations, config.psi_sweep, config.best_mode, config.worst_mode),
        "num_samples_sweep": num_samples_sweep(
            evaluations, config.num_samples_sweep, config.top_k, config.best_mode, config.worst_mode
        ),
    }
    for name, frame in sweeps.items():
        if frame.empty:
            logger.warning(f"{name}: no feasible setting for the available samples")
            continue
        write_table(frame.set_index(frame.columns[0]), paths.report(f"{name}.csv"))
    return sweeps


def evaluate(config: RunConfig, progress: bool = False) -> Dict[str, pd.DataFrame]:
    tables = {"auc_comparison": compare_models(config, progress)}
    if run_paths(config).scores.exists():
        tables.update(sensitivity_sweeps(config))
    else:
        logger.warning("No scored predictions; run `tpad score` for the ψ / Ψ sweeps")
    return tables


def merge_auc(run_dirs: Sequence[Path], output: Path) -> pd.DataFrame:
    """One AUC table over the held-out scenes of several runs, plus their Average."""
    tables = []
    for run_dir in run_dirs:
        path = require(RunPaths(Path(run_dir)).report("auc_comparison.csv"), "tpad eval")
        try:
            tables.append(pd.read_csv(path, index_col="model"))
        except ValueError as e:
            raise FormatError(f"{path} is not an AUC table: {e}")
    merged = merge_auc_tables(tables)
    write_table(merged, Path(output))
    logger.info(f"Merged {len(tables)} AUC tables over scenes {list(merged.columns[:-1])}")
    return merged


def _window_scores(model: TADModel, windows: Sequence) -> np.ndarray:
    return np.concatenate([model.score_window(w) for w in windows])


def plot(config: RunConfig) -> List[Path]:
    """Search curves of every strategy found, and the held-out anomaly-score histogram."""
    paths = run_paths(config)
    curves = {}
    for run in (paths, paths.random_baseline):
        history = load_history(run.root)
        if history:
            curves[history[0].strategy.value] = search_curve(history)
    if not curves:
        require(paths.history, "tpad search")
    written = [plots.plot_search_curves(curves, paths.plot("search_curve.png"))]

    if paths.final_model.exists():
        split = load_split(config)
        model = load_checkpoint(paths.final_model)
        negatives = make_negatives(split.test, config.noise_bound, config.seed)
        written.append(plots.plot_score_histogram(
            _window_scores(model, split.test), _window_scores(model, negatives), paths.plot("score_hist.png")
        ))
    else:
        logger.warning(f"{paths.final_model} not found; skipping the score histogram")
    return written

