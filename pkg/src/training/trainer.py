"""
Mini-batch Adam training loop.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.model.surfaceformer import SurfaceFormer
from src.nn.checkpoint import save_checkpoint
from src.nn.optim import Adam
from src.training.config import TrainConfig
from src.training.losses import loss
from src.training.samples import TrainingSample, augment
from src.utils.error_handling import (
    EmptyDataset,
    FileOperationError,
    ensure_directory_exists,
)
from src.utils.logging import log_stage

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, float], None]

# the spatial encoder needs a neighbour for every face
MIN_SAMPLE_FACES = 2


@dataclass
class TrainingResult:
    model: SurfaceFormer
    losses: List[float] = field(default_factory=list)
    checkpoint_path: Optional[Path] = None
    history_path: Optional[Path] = None

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else math.nan


def history_path_for(checkpoint_path: Union[str, Path]) -> Path:
    """``run.sfck`` -> ``run.history.json``"""
    return Path(checkpoint_path).with_suffix(".history.json")


def accumulate_gradients(
    model: SurfaceFormer,
    samples: Sequence[TrainingSample],
    alpha: float,
    scale: float = 1.0,
) -> Tuple[float, int]:
    """
    Backpropagate ``scale * loss`` of each sample, summing into ``.grad``.

    Samples too small for the spatial encoder are skipped.

    Returns:
        Tuple of (summed unscaled loss, number of samples used)
    """
    total = 0.0
    used = 0
    for sample in samples:
        if sample.size < MIN_SAMPLE_FACES:
            logger.warning(
                "Skipping the single-face patch around face %d", sample.center_face
            )
            continue
        prediction = model(sample.grids, sample.spatial, sample.mask)
        value = loss(prediction, sample, alpha)
        (value * scale).backward()
        total += float(value.values)
        used += 1
    return total, used


def _write_history(
    path: Path, losses: List[float], config: TrainConfig, model: SurfaceFormer
) -> None:
    record = {
        "model": model.config.model_dump(),
        "train": config.model_dump(),
        "losses": losses,
    }
    try:
        path.write_text(json.dumps(record, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise FileOperationError(f"Failed to write loss history: {path}", {"error": str(e)})


def train(
    samples: Sequence[TrainingSample],
    config: TrainConfig,
    model: SurfaceFormer,
    checkpoint_path: Optional[Union[str, Path]] = None,
    progress: Optional[ProgressCallback] = None,
) -> TrainingResult:
    """
    Optimize ``model`` on ``samples``.

    Each iteration draws ``batch_size`` distinct samples, augments each with
    a seed derived from (seed, sample index, iteration), backpropagates the
    batch-mean loss and takes one Adam step. Nothing depends on wall time or
    scheduling, so a seed fixes the whole run.

    Args:
        samples: Training samples (materialized on access)
        config: Optimization settings
        model: Network to train in place
        checkpoint_path: Where to write checkpoints and the loss history
        progress: Called with (iteration, batch loss) after every step

    Returns:
        TrainingResult with the per-iteration mean batch loss

    Raises:
        EmptyDataset: If ``samples`` is empty
    """
    if len(samples) == 0:
        raise EmptyDataset("No training samples")

    path = Path(checkpoint_path) if checkpoint_path is not None else None
    if path is not None and path.parent != Path(""):
        ensure_directory_exists(path.parent)

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(
        model.parameters(), config.lr, config.beta1, config.beta2, config.eps
    )
    batch_size = min(config.batch_size, len(samples))
    checkpoint_config = {**model.checkpoint_config(), "train": config.model_dump()}
    losses: List[float] = []

    logger.info(
        "Training %d parameters on %d samples (%d iterations, batch %d)",
        model.parameter_count(),
        len(samples),
        config.iterations,
        batch_size,
    )

    with log_stage(logger, "training loop", logging.INFO):
        for iteration in range(1, config.iterations + 1):
            _run_iteration(
                iteration, samples, model, optimizer, rng, config, batch_size, losses
            )
            if progress is not None:
                progress(iteration, losses[-1])
            if (
                path is not None
                and config.checkpoint_every
                and iteration % config.checkpoint_every == 0
                and iteration != config.iterations
            ):
                save_checkpoint(
                    path, model, checkpoint_config, iteration, optimizer.hyperparameters()
                )

    result = TrainingResult(model=model, losses=losses)
    if path is not None:
        save_checkpoint(
            path, model, checkpoint_config, config.iterations, optimizer.hyperparameters()
        )
        result.checkpoint_path = path
        result.history_path = history_path_for(path)
        _write_history(result.history_path, losses, config, model)
    return result


def _run_iteration(
    iteration: int,
    samples: Sequence[TrainingSample],
    model: SurfaceFormer,
    optimizer: Adam,
    rng: np.random.Generator,
    config: TrainConfig,
    batch_size: int,
    losses: List[float],
) -> None:
    """Draw one batch, take one optimizer step and record its mean loss."""
    indices = rng.choice(len(samples), size=batch_size, replace=False)
    batch = []
    for index in indices:
        sample = samples[int(index)]
        if config.augment:
            sample = augment(
                sample,
                seed=[config.seed, int(index), iteration],
                jitter_std=config.jitter_std,
            )
        batch.append(sample)

    total, used = accumulate_gradients(model, batch, config.alpha, 1.0 / batch_size)
    if used == 0:
        optimizer.zero_grad()
        logger.warning("Iteration %d had no usable samples", iteration)
        losses.append(math.nan)
    else:
        optimizer.step()
        losses.append(total / used)

    if iteration % config.log_every == 0 or iteration == 1:
        logger.info("Iteration %d: loss %.6g", iteration, losses[-1])
