"""Embedding + mean-pool + MLP text classifier, its weighted training loop and checkpoints."""

from dataclasses import dataclass, field
import logging
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .corpus import PAD_ID, IndexedDataset
from .diffusion import PseudoLabelSet
from .errors import ConfigError, DimensionMismatch, DivergedLoss, FormatError
from .graph import FeatureMatrix
from .metrics import MetricsReport, compute_metrics
from .utils import read_header, write_header

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"LPCK"
CHECKPOINT_VERSION = 1
# version, vocab_size, embed_dim, hidden_dim, num_hidden_layers, num_classes
CHECKPOINT_HEADER = "HIIIII"

WEIGHTING_NONE = "none"
WEIGHTING_CERTAINTY_CLASS = "certainty+class"

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
EVAL_BATCH_SIZE = 512


class TextClassifier(nn.Module):
    """Mean of non-pad token embeddings, ReLU hidden layer(s), linear class scores."""

    def __init__(self, vocab_size: int, embed_dim: int, hidden_dim: int, num_classes: int,
                 num_hidden_layers: int = 1, finetune_embeddings: bool = True):
        super().__init__()
        if num_hidden_layers < 1:
            raise ConfigError(f"num_hidden_layers must be >= 1, got {num_hidden_layers}")
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=PAD_ID)
        self.embedding.weight.requires_grad_(finetune_embeddings)

        layers: list[nn.Module] = []
        in_dim = embed_dim
        for _ in range(num_hidden_layers):
            layers += [nn.Linear(in_dim, hidden_dim), nn.ReLU()]
            in_dim = hidden_dim
        self.hidden = nn.Sequential(*layers)
        self.output = nn.Linear(hidden_dim, num_classes)

    @property
    def vocab_size(self) -> int:
        return self.embedding.num_embeddings

    @property
    def embed_dim(self) -> int:
        return self.embedding.embedding_dim

    @property
    def hidden_dim(self) -> int:
        return self.output.in_features

    @property
    def num_hidden_layers(self) -> int:
        return len(self.hidden) // 2

    @property
    def num_classes(self) -> int:
        return self.output.out_features

    @property
    def finetune_embeddings(self) -> bool:
        return self.embedding.weight.requires_grad

    def pool(self, tokens: torch.Tensor) -> torch.Tensor:
        """Mean over non-pad positions; all-pad rows pool to zero."""
        mask = (tokens != PAD_ID).unsqueeze(-1).to(self.embedding.weight.dtype)
        summed = (self.embedding(tokens) * mask).sum(dim=1)
        counts = mask.sum(dim=1).clamp(min=1.0)
        return summed / counts

    def forward(self, tokens: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        hidden = self.hidden(self.pool(tokens))
        return hidden, self.output(hidden)


def build_classifier(vocab_size: int, embed_dim: int, hidden_dim: int, num_classes: int,
                     num_hidden_layers: int = 1, finetune_embeddings: bool = True,
                     embeddings: np.ndarray | None = None, seed: int = 0) -> TextClassifier:
    """Seeded initialization; ``embeddings`` (|V| x d) replaces the random table."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = TextClassifier(vocab_size, embed_dim, hidden_dim, num_classes,
                               num_hidden_layers, finetune_embeddings)
    if embeddings is not None:
        if embeddings.shape != (vocab_size, embed_dim):
            raise DimensionMismatch(
                f"Embedding table is {embeddings.shape}, classifier expects {(vocab_size, embed_dim)}"
            )
        with torch.no_grad():
            model.embedding.weight.copy_(torch.as_tensor(embeddings, dtype=torch.float32))
    return model


def reset_head(model: TextClassifier, seed: int = 0) -> TextClassifier:
    """Re-initialize the output layer only; embedding and hidden weights are kept."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model.output.reset_parameters()
    return model


def weighted_loss(scores: torch.Tensor, targets: torch.Tensor, omega: torch.Tensor | None = None,
                  zeta: torch.Tensor | None = None) -> torch.Tensor:
    """Batch mean of omega_i * zeta[y_i] * CE(softmax(scores_i), y_i)."""
    per_sample = F.cross_entropy(scores, targets, reduction="none")
    if omega is None and zeta is None:
        return per_sample.mean()
    weights = torch.ones_like(per_sample)
    if omega is not None:
        weights = weights * omega
    if zeta is not None:
        weights = weights * zeta[targets]
    return (weights * per_sample).mean()


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    weighting: str = WEIGHTING_NONE

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        # 0 is accepted: it leaves every parameter where it started
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.weighting not in (WEIGHTING_NONE, WEIGHTING_CERTAINTY_CLASS):
            raise ConfigError(f"Unknown weighting '{self.weighting}'")


@dataclass
class TrainResult:
    model: TextClassifier
    losses: list[float] = field(default_factory=list)


def _training_targets(dataset: IndexedDataset, pseudo: PseudoLabelSet | None, weighting: str):
    if pseudo is None:
        rows = np.flatnonzero(dataset.labeled_mask)
        targets = dataset.gold_labels[rows]
        return rows, targets, None, None

    if len(pseudo) != len(dataset):
        raise ValueError(f"Pseudo-labels cover {len(pseudo)} points, dataset has {len(dataset)}")
    rows = np.arange(len(dataset))
    if weighting == WEIGHTING_NONE:
        return rows, pseudo.labels, None, None
    omega = torch.as_tensor(pseudo.certainty, dtype=torch.float32)
    zeta = torch.as_tensor(pseudo.class_weights, dtype=torch.float32)
    return rows, pseudo.labels, omega, zeta


def train(model: TextClassifier, dataset: IndexedDataset, pseudo: PseudoLabelSet | None,
          cfg: TrainConfig) -> TrainResult:
    """Minibatch Adam on the labeled rows, or on every row against ``pseudo`` labels.

    Shuffling uses a generator seeded from ``cfg.seed`` so a rerun is bit-identical.
    Raises DivergedLoss as soon as the loss or any parameter stops being finite.
    """
    rows, targets, omega, zeta = _training_targets(dataset, pseudo, cfg.weighting)
    if rows.size == 0:
        raise ValueError("No training rows")

    sequences = torch.as_tensor(dataset.sequences[rows], dtype=torch.long)
    targets = torch.as_tensor(targets, dtype=torch.long)
    if omega is not None:
        omega = omega[torch.as_tensor(rows)]

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=cfg.learning_rate, betas=ADAM_BETAS, eps=ADAM_EPS)
    generator = torch.Generator().manual_seed(cfg.seed)
    n = sequences.shape[0]

    model.train()
    losses = []
    for epoch in range(cfg.epochs):
        order = torch.randperm(n, generator=generator)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, scores = model(sequences[batch])
            loss = weighted_loss(
                scores,
                targets[batch],
                omega[batch] if omega is not None else None,
                zeta,
            )
            if not torch.isfinite(loss):
                raise DivergedLoss(f"Loss became non-finite at epoch {epoch + 1}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * batch.shape[0]

        if not all(torch.isfinite(p).all() for p in model.parameters()):
            raise DivergedLoss(f"Non-finite parameters after epoch {epoch + 1}")
        losses.append(total / n)
        logger.debug(f"epoch {epoch + 1}/{cfg.epochs}: loss {losses[-1]:.6f}")

    model.eval()
    logger.info(f"Trained {cfg.epochs} epoch(s) on {n} points, final loss {losses[-1]:.4f}")
    return TrainResult(model=model, losses=losses)


@torch.no_grad()
def _forward_all(model: TextClassifier, dataset: IndexedDataset) -> tuple[np.ndarray, np.ndarray]:
    model.eval()
    hidden_parts, score_parts = [], []
    sequences = torch.as_tensor(dataset.sequences, dtype=torch.long)
    for start in range(0, sequences.shape[0], EVAL_BATCH_SIZE):
        hidden, scores = model(sequences[start:start + EVAL_BATCH_SIZE])
        hidden_parts.append(hidden.double().numpy())
        score_parts.append(torch.softmax(scores.double(), dim=1).numpy())
    h, c = model.hidden_dim, model.num_classes
    hidden = np.concatenate(hidden_parts) if hidden_parts else np.zeros((0, h))
    probs = np.concatenate(score_parts) if score_parts else np.zeros((0, c))
    return hidden, probs


def extract_features(model: TextClassifier, dataset: IndexedDataset) -> FeatureMatrix:
    """Penultimate-layer representation of every row, in dataset order."""
    hidden, _ = _forward_all(model, dataset)
    return FeatureMatrix(values=hidden)


def predict_proba(model: TextClassifier, dataset: IndexedDataset) -> np.ndarray:
    _, probs = _forward_all(model, dataset)
    return probs


def evaluate(model: TextClassifier, dataset: IndexedDataset) -> MetricsReport:
    probs = predict_proba(model, dataset)
    return compute_metrics(dataset.gold_labels, probs, model.num_classes)


def save_checkpoint(path: str | Path, model: TextClassifier) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        write_header(f, CHECKPOINT_MAGIC, CHECKPOINT_HEADER, CHECKPOINT_VERSION, model.vocab_size,
                     model.embed_dim, model.hidden_dim, model.num_hidden_layers, model.num_classes)
        for tensor in model.state_dict().values():
            f.write(tensor.detach().cpu().numpy().astype("<f4").tobytes())
    logger.info(f"💾  Saved checkpoint to {path}")
    return path


def load_checkpoint(path: str | Path, finetune_embeddings: bool = True,
                    expected: dict[str, int] | None = None) -> TextClassifier:
    """Rebuild a classifier from an LPCK file.

    ``expected`` maps header fields (``vocab_size``, ``embed_dim``, ``hidden_dim``,
    ``num_hidden_layers``, ``num_classes``) to the values the caller's config implies.
    """
    with open(path, "rb") as f:
        version, vocab_size, embed_dim, hidden_dim, layers, num_classes = read_header(
            f, CHECKPOINT_MAGIC, CHECKPOINT_HEADER
        )
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        header = {
            "vocab_size": vocab_size,
            "embed_dim": embed_dim,
            "hidden_dim": hidden_dim,
            "num_hidden_layers": layers,
            "num_classes": num_classes,
        }
        for key, value in (expected or {}).items():
            if header[key] != value:
                raise DimensionMismatch(f"{path}: checkpoint {key}={header[key]}, config expects {value}")

        model = TextClassifier(vocab_size, embed_dim, hidden_dim, num_classes, layers, finetune_embeddings)
        state = {}
        for name, tensor in model.state_dict().items():
            count = tensor.numel()
            raw = f.read(4 * count)
            if len(raw) != 4 * count:
                raise FormatError(f"{path}: truncated parameter block '{name}'")
            state[name] = torch.from_numpy(np.frombuffer(raw, dtype="<f4").copy()).reshape(tensor.shape)
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after parameters")

    model.load_state_dict(state)
    model.eval()
    return model


__all__ = [
    "TextClassifier",
    "TrainConfig",
    "TrainResult",
    "WEIGHTING_NONE",
    "WEIGHTING_CERTAINTY_CLASS",
    "build_classifier",
    "reset_head",
    "weighted_loss",
    "train",
    "extract_features",
    "predict_proba",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
]
