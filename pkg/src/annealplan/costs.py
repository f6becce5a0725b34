"""FLOPs cost calculus for data curation and annealing training.

Every quantity is a real-valued FLOPs count; nothing is rounded to
integers, so identities such as cost additivity hold to machine
precision. Costs come in two bases: curation only (the FLOPs spent
obtaining the upsampled tokens) or curation plus the annealing
training itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

__all__ = [
    "AnnealingGeometry",
    "CostBasis",
    "ModelSpec",
    "SourceCostModel",
    "SourceKind",
    "curation_cost",
    "inference_flops_per_token",
    "seed_token_unit_cost",
    "seed_tokens_required",
    "tinygsm_curation_cost",
    "tinygsm_mind_curation_cost",
    "tokens_per_step",
    "total_cost",
    "training_flops",
]

# FLOPs per generated token for the GPT-3.5-class model assumed to have
# produced the TinyGSM corpus (2 * 175e9 parameters), and for the 7B
# model assumed to have rewritten it into TinyGSM-MIND (2 * 7e9). The
# MIND corpus is 3.6x the size of its source, with 1/3.6 of its tokens
# carried over and 2/3.6 freshly generated by the smaller model.
TINYGSM_GENERATION_FLOPS_PER_TOKEN = 350e9
TINYGSM_MIND_GENERATION_FLOPS_PER_TOKEN = 14e9
TINYGSM_MIND_EXPANSION = 3.6


class CostBasis(enum.Enum):
    """Which FLOPs are charged to a data source."""

    CURATION_ONLY = "curation-only"
    CURATION_PLUS_ANNEALING = "total"


class SourceKind(enum.Enum):
    MBF = "mbf"
    SYNTHETIC = "synthetic"
    REPHRASE = "rephrase"
    ZERO_COST = "zero_cost"


@dataclass(frozen=True)
class ModelSpec:
    """A model identified only by its parameter count."""

    param_count: float

    def __post_init__(self) -> None:
        if not self.param_count > 0:
            raise ValueError(f"param_count must be positive, got {self.param_count}")


@dataclass(frozen=True)
class AnnealingGeometry:
    """Batch geometry and upsampling configuration of an annealing run.

    ``upsample_ratio`` is the fraction of each batch drawn from the
    evaluated source; the remainder is replay of the default mix.
    ``epochs`` counts passes over the upsampled tokens (1.0 means every
    upsampled token is seen once).
    """

    batch_size: int
    sequence_length: int
    upsample_ratio: float
    epochs: float = 1.0

    def __post_init__(self) -> None:
        if self.batch_size <= 0:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.sequence_length <= 0:
            raise ValueError(f"sequence_length must be positive, got {self.sequence_length}")
        if not 0.0 < self.upsample_ratio < 1.0:
            raise ValueError(
                f"upsample_ratio must lie strictly between 0 and 1, got {self.upsample_ratio}"
            )
        if not self.epochs >= 1.0:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True)
class SourceCostModel:
    """Curation cost parameters of one data source.

    ``expansion_factor`` is the number of synthetic tokens generated per
    seed token. ``annotator_per_token_flops`` is the inference cost of
    scoring one candidate token with the quality annotator (a reasonable
    default is 2x the annotator's parameter count, matching the
    inference convention used everywhere else); ``annotator_training_flops``
    is the one-time cost of training that annotator, amortized over the
    seed tokens it yields. ``mbf_recall`` is how many tokens must be
    scored to keep one seed token.
    """

    kind: SourceKind
    expansion_factor: float = 0.0
    generator: ModelSpec | None = None
    annotator_per_token_flops: float = 0.0
    annotator_training_flops: float = 0.0
    mbf_recall: float = 1.0

    def __post_init__(self) -> None:
        if self.expansion_factor < 0:
            raise ValueError(f"expansion_factor must be >= 0, got {self.expansion_factor}")
        if self.annotator_per_token_flops < 0:
            raise ValueError("annotator_per_token_flops must be >= 0")
        if self.annotator_training_flops < 0:
            raise ValueError("annotator_training_flops must be >= 0")
        if self.kind in (SourceKind.SYNTHETIC, SourceKind.REPHRASE) and self.generator is None:
            raise ValueError(f"{self.kind.value} source requires a generator model")
        if self.expansion_factor > 0 and self.generator is None:
            raise ValueError("expansion_factor > 0 requires a generator model")
        if self.kind is SourceKind.MBF and not self.mbf_recall >= 1.0:
            raise ValueError(f"mbf source requires mbf_recall >= 1, got {self.mbf_recall}")
        if self.kind is SourceKind.ZERO_COST:
            if (
                self.expansion_factor != 0.0
                or self.generator is not None
                or self.annotator_per_token_flops != 0.0
                or self.annotator_training_flops != 0.0
            ):
                raise ValueError("zero_cost source must have all cost fields zero")


def training_flops(tokens: float, model: ModelSpec) -> float:
    """Training cost in FLOPs: 6 FLOPs per parameter per token."""
    if tokens < 0:
        raise ValueError(f"tokens must be >= 0, got {tokens}")
    return 6.0 * model.param_count * tokens


def inference_flops_per_token(model: ModelSpec) -> float:
    """Generation/inference cost in FLOPs per token: 2 FLOPs per parameter."""
    return 2.0 * model.param_count


def tokens_per_step(geom: AnnealingGeometry) -> tuple[float, float]:
    """Tokens consumed per training step: (total, upsampled portion).

    Both values are exact reals; the upsampled portion is generally
    fractional (e.g. 209,715.2 for a 256 x 8192 batch at 10% upsampling).
    """
    total = float(geom.batch_size * geom.sequence_length)
    return total, geom.upsample_ratio * total


def seed_tokens_required(geom: AnnealingGeometry, total_tokens: float, expansion: float) -> float:
    """Seed tokens needed to fill the upsampled share of a training run.

    The upsampled share of ``total_tokens`` is covered by ``epochs``
    passes over the seed tokens plus whatever was generated from them,
    so the requirement is upsample_ratio * total / (epochs * (1 + expansion)).
    """
    if total_tokens < 0:
        raise ValueError(f"total_tokens must be >= 0, got {total_tokens}")
    if expansion < 0:
        raise ValueError(f"expansion must be >= 0, got {expansion}")
    return geom.upsample_ratio * total_tokens / (geom.epochs * (1.0 + expansion))


def seed_token_unit_cost(model: SourceCostModel, seed_tokens: float) -> float:
    """Per-token cost of obtaining seed tokens through annotation filtering.

    recall * per-token annotation cost, plus the annotator's one-time
    training cost amortized over the requested seed tokens.
    """
    if model.kind is not SourceKind.MBF:
        raise ValueError(f"seed token cost is defined for mbf sources, not {model.kind.value}")
    if seed_tokens <= 0:
        raise ValueError("no seed tokens requested")
    return (
        model.mbf_recall * model.annotator_per_token_flops
        + model.annotator_training_flops / seed_tokens
    )


def curation_cost(model: SourceCostModel, seed_tokens: float, seed_unit_cost: float) -> float:
    """Curation FLOPs: seed acquisition plus synthetic generation.

    seed_unit_cost * m + (2 * generator params) * expansion * m, with m
    the seed token count. Zero-cost sources cost nothing by definition.
    """
    if seed_tokens < 0:
        raise ValueError(f"seed_tokens must be >= 0, got {seed_tokens}")
    if model.kind is SourceKind.ZERO_COST:
        return 0.0
    generation = 0.0
    if model.expansion_factor > 0:
        if model.generator is None:
            raise ValueError("source generates synthetic tokens but has no generator model")
        generation = (
            inference_flops_per_token(model.generator) * model.expansion_factor * seed_tokens
        )
    return seed_unit_cost * seed_tokens + generation


def _internal_seed_unit_cost(model: SourceCostModel, seed_tokens: float) -> float:
    # Same formula as seed_token_unit_cost but applicable to any kind:
    # synthetic/rephrase sources may also pay for annotated seed selection.
    if seed_tokens <= 0:
        return 0.0
    return (
        model.mbf_recall * model.annotator_per_token_flops
        + model.annotator_training_flops / seed_tokens
    )


def total_cost(
    model: SourceCostModel,
    geom: AnnealingGeometry,
    total_tokens: float,
    training_model: ModelSpec,
    basis: CostBasis,
) -> float:
    """Cost of an annealing run over ``total_tokens`` under the given basis.

    Curation-only charges just the source's curation FLOPs for the seed
    tokens implied by the geometry; the full basis adds 6 * |params| *
    total_tokens of training.
    """
    breakdown = cost_breakdown(model, geom, total_tokens, training_model)
    curation, training = breakdown
    if basis is CostBasis.CURATION_ONLY:
        return curation
    return curation + training


def cost_breakdown(
    model: SourceCostModel,
    geom: AnnealingGeometry,
    total_tokens: float,
    training_model: ModelSpec,
) -> tuple[float, float]:
    """(curation FLOPs, training FLOPs) for an annealing run."""
    if total_tokens < 0:
        raise ValueError(f"total_tokens must be >= 0, got {total_tokens}")
    training = training_flops(total_tokens, training_model)
    if model.kind is SourceKind.ZERO_COST:
        return 0.0, training
    m = seed_tokens_required(geom, total_tokens, model.expansion_factor)
    curation = curation_cost(model, m, _internal_seed_unit_cost(model, m))
    return curation, training


def tinygsm_curation_cost(steps: float, geom: AnnealingGeometry) -> float:
    """Curation cost of running ``steps`` annealing steps on TinyGSM data.

    Every upsampled token is charged at the large generator's rate; the
    exact per-step upsampled token count of ``geom`` is used rather than
    a rounded figure.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    _, upsampled = tokens_per_step(geom)
    return steps * upsampled * TINYGSM_GENERATION_FLOPS_PER_TOKEN


def tinygsm_mind_curation_cost(steps: float, geom: AnnealingGeometry) -> float:
    """Curation cost of ``steps`` annealing steps on TinyGSM-MIND data.

    1/3.6 of the upsampled tokens carry the original TinyGSM price and
    2/3.6 the cheaper 7B rewriting price, so this is strictly below the
    TinyGSM cost at every positive step count.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    _, upsampled = tokens_per_step(geom)
    carried = tinygsm_curation_cost(steps, geom) / TINYGSM_MIND_EXPANSION
    rewritten = (
        2.0
        / TINYGSM_MIND_EXPANSION
        * steps
        * upsampled
        * TINYGSM_MIND_GENERATION_FLOPS_PER_TOKEN
    )
    return carried + rewritten
