"""Candidate evaluation and the search loop (REINFORCE or random), with resumable run state."""

import json
import logging
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from src.data.trajectories import DatasetSplit
from src.db.run_store import (
    RunPaths,
    append_jsonl,
    read_jsonl,
    rewrite_jsonl,
    write_json,
    write_text_atomic,
)
from src.errors import ConfigurationError, ContractError, DataError, NumericError, ResumeError
from src.model.space import decode, describe_spec
from src.model.tad_model import build_from_config
from src.schemas.pydantic_schemas import RunConfig, SearchRecord, Strategy
from src.search.controller import (
    Controller,
    reinforce_update,
    sample_uniform_sequences,
    update_baseline,
)
from src.tpeval.metrics import auc

logger = logging.getLogger(__name__)

# (reward, diagnostic) of one operator sequence
Evaluator = Callable[[List[int]], Tuple[float, Optional[str]]]
CHANCE_REWARD = 0.5


# --- 1. Rewards ---

def validation_auc(scorer: Callable, positives: Sequence, negatives: Sequence) -> float:
    """AUC of per-window mean anomaly scores, positives expected to score lower."""
    pos = [float(np.mean(scorer(w))) for w in positives]
    neg = [float(np.mean(scorer(w))) for w in negatives]
    if not np.isfinite(pos + neg).all():
        raise NumericError("non-finite anomaly scores on the validation set")
    return auc(pos, neg)


def evaluate_candidate(sequence: Sequence[int], split: DatasetSplit, config: RunConfig) -> Tuple[float, Optional[str]]:
    """decode -> build -> train `candidate_epochs` -> validation AUC.

    Diverging or unscorable candidates get the chance reward and a diagnostic instead of an error.
    """
    try:
        spec = decode(sequence)
        if not any(spec.gammas):
            raise ConfigurationError("all scoring weights are zero")
        model = build_from_config(spec, config)
        model.fit(split.train, config.candidate_epochs, lr=config.model_lr, seed=config.seed)
        return validation_auc(model.score_window, split.val, split.val_neg), None
    except (NumericError, ConfigurationError) as e:
        logger.warning(f"Candidate {list(sequence)} rewarded at chance: {e.detail}")
        return CHANCE_REWARD, e.detail


class CandidateEvaluator:
    """Picklable evaluator over a fixed split, usable from worker processes."""

    def __init__(self, split: DatasetSplit, config: RunConfig):
        self.split = split
        self.config = config

    def __call__(self, sequence: List[int]) -> Tuple[float, Optional[str]]:
        return evaluate_candidate(sequence, self.split, self.config)


class SlotMatchingBandit:
    """Synthetic reward: the fraction of slots that match a hidden target sequence."""

    def __init__(self, target: Sequence[int]):
        decode(target)
        self.target = np.asarray(target)

    @classmethod
    def random(cls, seed: int = 0) -> "SlotMatchingBandit":
        return cls(sample_uniform_sequences(np.random.default_rng(seed), 1)[0].tolist())

    def __call__(self, sequence: List[int]) -> Tuple[float, Optional[str]]:
        return float(np.mean(np.asarray(sequence) == self.target)), None


# --- 2. Search state ---

@dataclass
class SearchResult:
    best: SearchRecord
    history: List[SearchRecord]
    # the trained policy; None for random search
    controller: Optional[Controller] = None


class SearchState:
    """Everything needed to continue a search exactly where it stopped."""

    def __init__(self, config: RunConfig, strategy: Strategy):
        self.strategy = strategy
        self.step = 0
        self.elapsed = 0.0
        self.baseline: Optional[float] = None
        self.baseline_decay = config.baseline_decay
        self.entropy_weight = config.entropy_weight
        self.entropy_anneal = config.entropy_anneal
        self.rng = np.random.default_rng(config.seed)
        self.generator = torch.Generator().manual_seed(config.seed)
        with torch.random.fork_rng():
            torch.manual_seed(config.seed)
            self.controller = Controller(config.embedding_size, config.hidden_size)
        self.optimizer = torch.optim.Adam(self.controller.parameters(), lr=config.controller_lr)

    def propose(self) -> List[int]:
        if self.strategy == Strategy.RANDOM:
            return sample_uniform_sequences(self.rng, 1)[0].tolist()
        with torch.no_grad():
            return self.controller.rollout(1, self.generator).sequences()[0]

    def current_entropy_weight(self) -> float:
        """Entropy bonus at this step: linear decay to zero over `entropy_anneal` candidates."""
        if self.entropy_anneal is None:
            return self.entropy_weight
        return self.entropy_weight * max(0.0, 1.0 - self.step / self.entropy_anneal)

    def learn(self, sequence: List[int], reward: float):
        """REINFORCE step on a finished candidate (log-probabilities under the current θ), then the baseline."""
        if self.strategy == Strategy.REINFORCE:
            rollout = self.controller.rollout(forced=[sequence])
            baseline = reward if self.baseline is None else self.baseline
            reinforce_update(
                self.optimizer, rollout.log_probs[0], reward, baseline,
                entropies=rollout.entropies[0], entropy_weight=self.current_entropy_weight(),
            )
        self.baseline = update_baseline(self.baseline, reward, self.baseline_decay)

    def save(self, path: Path):
        payload = {
            "strategy": self.strategy.value,
            "step": self.step,
            "elapsed": self.elapsed,
            "baseline": self.baseline,
            "controller": self.controller.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "generator": self.generator.get_state(),
            "numpy_rng": json.dumps(self.rng.bit_generator.state),
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        torch.save(payload, tmp)
        tmp.replace(path)

    def restore(self, path: Path):
        try:
            payload = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as e:
            raise ResumeError(f"search state {path} is unreadable: {e}")
        if payload.get("strategy") != self.strategy.value:
            raise ResumeError(
                f"search state {path} was written by strategy {payload.get('strategy')!r}, "
                f"not {self.strategy.value!r}; use a fresh run directory or --resume false"
            )
        try:
            self.controller.load_state_dict(payload["controller"])
            self.optimizer.load_state_dict(payload["optimizer"])
            self.generator.set_state(payload["generator"])
            self.rng.bit_generator.state = json.loads(payload["numpy_rng"])
            self.step = int(payload["step"])
            self.elapsed = float(payload["elapsed"])
            self.baseline = payload["baseline"]
        except (KeyError, RuntimeError, TypeError, ValueError) as e:
            raise ResumeError(f"search state {path} is corrupt: {e}")


def _resume(state: SearchState, paths: RunPaths) -> List[SearchRecord]:
    """Reload state and history; history lines written after the last checkpoint are dropped."""
    if not paths.controller.exists():
        if paths.history.exists():
            logger.warning(f"No search state next to {paths.history}; starting over")
            paths.history.unlink()
        return []
    state.restore(paths.controller)
    try:
        history = [SearchRecord(**r) for r in read_jsonl(paths.history)]
    except (DataError, TypeError, ValueError) as e:
        raise ResumeError(f"search history {paths.history} is corrupt: {e}")
    if len(history) < state.step:
        raise ResumeError(f"search history has {len(history)} records but the state is at step {state.step}")
    if len(history) > state.step:
        logger.info(f"Discarding {len(history) - state.step} records written after the last checkpoint")
        history = history[: state.step]
        rewrite_jsonl(paths.history, [r.model_dump(mode="json") for r in history])
    logger.info(f"Resuming {state.strategy.value} search at candidate {state.step}")
    return history


# --- 3. Outputs ---

def best_record(history: Sequence[SearchRecord]) -> SearchRecord:
    """Highest reward; the earliest record wins ties."""
    if not history:
        raise ContractError("empty search history")
    return max(history, key=lambda r: (r.reward, -r.index))


def search_curve(history: Sequence[SearchRecord]) -> pd.DataFrame:
    """Best-so-far reward against wall time."""
    frame = pd.DataFrame([r.model_dump(mode="json") for r in history])
    frame["best_reward"] = frame["reward"].cummax()
    return frame[["index", "wall_time", "reward", "best_reward", "strategy"]]


def write_search_outputs(history: Sequence[SearchRecord], paths: RunPaths):
    best = best_record(history)
    write_text_atomic(paths.curve, search_curve(history).to_csv(index=False))
    write_json(paths.best_spec, best.model_dump(mode="json"))
    write_text_atomic(paths.best_spec.with_suffix(".txt"), describe_spec(decode(best.sequence)))


# --- 4. The loop ---

def run_search(
    evaluate: Evaluator,
    config: RunConfig,
    run_dir: Optional[Path] = None,
    strategy: Optional[Strategy] = None,
    progress: bool = False,
) -> SearchResult:
    """sample -> evaluate -> update until `config.budget` candidates or `config.max_seconds` elapse.

    With a run directory, every record is appended to the history and the state is checkpointed
    every `config.checkpoint_every` candidates, so an interrupted search resumes.
    """
    strategy = Strategy(strategy or config.strategy)
    state = SearchState(config, strategy)
    paths = RunPaths(Path(run_dir)) if run_dir is not None else None
    history: List[SearchRecord] = []
    if paths is not None:
        if config.resume:
            history = _resume(state, paths)
        elif paths.history.exists():
            paths.history.unlink()

    bar = tqdm(total=config.budget, initial=state.step, desc=f"{strategy.value} search") if progress else None
    clock = time.monotonic() - state.elapsed

    def out_of_time() -> bool:
        return config.max_seconds is not None and time.monotonic() - clock >= config.max_seconds

    def record(sequence: List[int], reward: float, diagnostic: Optional[str]):
        state.learn(sequence, reward)
        state.elapsed = time.monotonic() - clock
        entry = SearchRecord(
            index=state.step, sequence=sequence, reward=reward, wall_time=state.elapsed,
            strategy=strategy, diagnostic=diagnostic,
        )
        history.append(entry)
        state.step += 1
        best = best_record(history)
        logger.info(f"Candidate {entry.index}: reward {reward:.4f} (best {best.reward:.4f} at {best.index})")
        if paths is not None:
            append_jsonl(paths.history, entry.model_dump(mode="json"))
            if state.step % config.checkpoint_every == 0 or state.step == config.budget:
                state.save(paths.controller)
        if bar is not None:
            bar.update(1)

    if config.workers == 1:
        while state.step < config.budget and not out_of_time():
            sequence = state.propose()
            reward, diagnostic = evaluate(sequence)
            record(sequence, reward, diagnostic)
    else:
        # asynchronous: updates apply in completion order with the baseline current at that time
        submitted = state.step
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            pending: Dict = {}
            while submitted < config.budget or pending:
                while len(pending) < config.workers and submitted < config.budget and not out_of_time():
                    sequence = state.propose()
                    pending[pool.submit(evaluate, sequence)] = sequence
                    submitted += 1
                if not pending:
                    break
                done, _ = wait(pending, return_when=FIRST_COMPLETED)
                for future in done:
                    sequence = pending.pop(future)
                    reward, diagnostic = future.result()
                    record(sequence, reward, diagnostic)

    if bar is not None:
        bar.close()
    if not history:
        raise ContractError("search finished without evaluating a candidate; raise the budget or max_seconds")
    if paths is not None:
        state.save(paths.controller)
        write_search_outputs(history, paths)
    controller = state.controller if strategy == Strategy.REINFORCE else None
    if controller is not None:
        logger.info(f"Controller modal sequence: {controller.modal_sequence()}")
    return SearchResult(best=best_record(history), history=history, controller=controller)


def random_search(
    evaluate: Evaluator, config: RunConfig, run_dir: Optional[Path] = None, progress: bool = False
) -> SearchResult:
    """Uniform sampling (γ mask respected) through the same evaluation path and record format."""
    return run_search(evaluate, config, run_dir, strategy=Strategy.RANDOM, progress=progress)


def load_history(run_dir: Path) -> List[SearchRecord]:
    return [SearchRecord(**r) for r in read_jsonl(RunPaths(Path(run_dir)).history)]
