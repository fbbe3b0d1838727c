"""
AMTL Configuration

Pydantic models for every tunable, with the documented defaults, plus the
flat ``key=value`` file format and ``AMTL_*`` environment overrides.

Precedence, lowest first: model defaults, config file, environment, explicit
overrides (CLI flags). Keys may be section-qualified (``train.lr=0.001``);
an unqualified key is looked up in the train, model, corrector, policy and
eval sections, in that order.
"""

import os
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from amtl.errors import ConfigError
from amtl.models import PhaseSchedule

ENV_PREFIX = "AMTL_"


class ModelConfig(BaseModel):
    """Shape of the shared encoder and its three heads."""

    model_config = ConfigDict(extra="forbid")

    layers: int = Field(2, ge=1, description="Encoder layers")
    hidden: int = Field(128, ge=2, description="Hidden width")
    heads: int = Field(4, ge=1, description="Attention heads")
    max_len: int = Field(64, ge=3, description="Positions including BOS and EOS")
    vs: int = Field(64, ge=8, description="Vocabulary size including specials")
    dropout: float = Field(0.1, ge=0.0, lt=1.0, description="Encoder and LM-head dropout")
    policy_dropout: float = Field(0.5, ge=0.0, lt=1.0, description="Policy head dropout")
    ffn_mult: int = Field(4, ge=1, description="Feed-forward width multiplier")
    init_std: float = Field(0.02, gt=0.0, description="Normal init standard deviation")
    seed: int = Field(0, description="Parameter initialisation seed")

    @model_validator(mode="after")
    def _heads_divide_hidden(self) -> "ModelConfig":
        if self.hidden % self.heads:
            raise ValueError(f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")
        return self


class TrainConfig(BaseModel):
    """Adversarial multi-task training."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    ct: float = Field(1000.0, alias="Ct", description="Rank range of the index generator")
    pos_threshold: int = Field(20, ge=1, description="Ranks below this are positive tokens")
    s_g: float = Field(1.15, alias="S_g", gt=0.0, description="Similarity offset in W_G")
    lr: float = Field(0.00002, gt=0.0)
    warmup_steps: int = Field(10_000, ge=0, description="Warmup at full scale")
    warmup_fraction: float = Field(
        0.05, ge=0.0, le=1.0, description="Warmup cap as a share of total steps"
    )
    weight_decay: float = Field(0.01, ge=0.0)
    grad_clip: float = Field(1.0, ge=0.0, description="Global norm clip; 0 disables")
    mask_ratio: float = Field(0.15, gt=0.0, le=1.0)
    epochs: int = Field(3, ge=1)
    batch: int = Field(32, ge=1)
    seed: int = 0
    phase_schedule: PhaseSchedule = PhaseSchedule.AMTL
    clamp_wg_nonneg: bool = Field(False, description="Clamp negative W_G to zero")
    ratio_post_sigmoid: bool = Field(
        False, description="Apply the ratio term to sigmoid probabilities"
    )
    label_identity_correct: bool = Field(
        False, description="Label a generated token equal to the original as correct"
    )
    holdout: float = Field(0.1, ge=0.0, lt=1.0, description="Held-out share of the corpus")
    corpus_size: int = Field(20_000, ge=1, description="Sentences generated when none given")

    @field_validator("phase_schedule", mode="before")
    @classmethod
    def _phase_alias(cls, value: object) -> object:
        return "mtl" if value == "mtl-only" else value

    @model_validator(mode="after")
    def _check_ranks(self) -> "TrainConfig":
        if self.ct <= 1:
            raise ValueError("Ct must exceed 1")
        if self.pos_threshold >= self.ct:
            raise ValueError("pos_threshold must be below Ct")
        return self


class CorrectorConfig(BaseModel):
    """Mask-fill-rescore search."""

    model_config = ConfigDict(extra="forbid")

    width: int = Field(2, ge=0)
    depth: int = Field(4, ge=0)
    include_identity: bool = True
    refill: Literal["simultaneous", "iterative"] = "simultaneous"
    max_tokens: int = Field(62, ge=1, description="Longest candidate the models accept")
    rounds: int = Field(1, ge=1, description="Search rounds for iterative correction")


class PolicyConfig(BaseModel):
    """Policy span predictor training."""

    model_config = ConfigDict(extra="forbid")

    lr: float = Field(0.001, gt=0.0)
    epochs: int = Field(5, ge=1)
    batch: int = Field(32, ge=1)
    samples: int = Field(2000, ge=1, description="Corrupted sentences used for supervision")
    seed: int = 0
    target: Literal["search", "ground_truth"] = "search"
    end_low_from_start: bool = Field(
        False, description="Take the end minimum from the corrected span start"
    )
    weight_decay: float = Field(0.01, ge=0.0)


class EvalConfig(BaseModel):
    """Held-out evaluation."""

    model_config = ConfigDict(extra="forbid")

    topk: int = Field(4, ge=1)
    samples: int = Field(1000, ge=1)
    seed: int = 0
    average: Literal["macro", "micro"] = "macro"
    mask_ratio: float = Field(0.15, gt=0.0, le=1.0)
    multi_span: int = Field(1, ge=1, description="Corruptions per evaluation sentence")


class RunConfig(BaseModel):
    """All sections together; what the CLI resolves and echoes."""

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    corrector: CorrectorConfig = Field(default_factory=CorrectorConfig)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    def resolved_lines(self) -> List[str]:
        """Fully resolved config as sorted ``section.key=value`` lines."""
        lines = []
        for section, values in self.model_dump(mode="json").items():
            for key, value in values.items():
                lines.append(f"{section}.{key}={_render(value)}")
        return sorted(lines)

    def flat(self) -> Dict[str, str]:
        return dict(line.split("=", 1) for line in self.resolved_lines())


SECTIONS = ("train", "model", "corrector", "policy", "eval")


def _render(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def parse_key_values(text: str, origin: str = "<config>") -> Dict[str, str]:
    """
    Parse flat ``key=value`` lines.

    Args:
        text: File contents
        origin: Name used in error messages

    Returns:
        Mapping of raw keys to raw string values

    Raises:
        ConfigError: On a non-blank, non-comment line without ``=``
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _section_fields(section: str) -> Dict[str, str]:
    """Field name and alias -> field name for one section."""
    model = RunConfig.model_fields[section].annotation
    names = {}
    for name, info in model.model_fields.items():
        names[name] = name
        if info.alias:
            names[info.alias] = name
    return names


def _qualify(key: str) -> tuple[str, str]:
    if "." in key:
        section, name = key.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r} in key {key!r}")
        fields = _section_fields(section)
        if name not in fields:
            raise ConfigError(f"unknown key {name!r} in section {section!r}")
        return section, fields[name]
    for section in SECTIONS:
        fields = _section_fields(section)
        if key in fields:
            return section, fields[key]
    raise ConfigError(f"unknown config key {key!r}")


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """
    Collect ``AMTL_<SECTION>_<KEY>`` variables as ``section.key`` overrides.

    ``AMTL_LOG_LEVEL`` is left to the logging setup.
    """
    environ = os.environ if environ is None else environ
    overrides = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX) or name == "AMTL_LOG_LEVEL":
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section, _, key = rest.partition("_")
        if section in SECTIONS and key:
            overrides[f"{section}.{key}"] = value
    return overrides


def load_config(
    path: Optional[str | Path] = None,
    overrides: Optional[Mapping[str, object]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Resolve a RunConfig from file, environment and overrides.

    Args:
        path: Optional ``key=value`` config file
        overrides: Highest-precedence values (CLI flags); ``None`` values are skipped
        environ: Environment mapping (defaults to ``os.environ``)

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: Unreadable file, unknown key or invalid value
    """
    layered: Dict[str, object] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from e
        layered.update(parse_key_values(text, origin=str(path)))
    layered.update(env_overrides(environ))
    layered.update({k: v for k, v in (overrides or {}).items() if v is not None})

    sections: Dict[str, Dict[str, object]] = {s: {} for s in SECTIONS}
    for key, value in layered.items():
        section, name = _qualify(key)
        sections[section][name] = value
    try:
        return RunConfig(
            model=ModelConfig(**sections["model"]),
            train=TrainConfig(**sections["train"]),
            corrector=CorrectorConfig(**sections["corrector"]),
            policy=PolicyConfig(**sections["policy"]),
            eval=EvalConfig(**sections["eval"]),
        )
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def write_config(config: RunConfig, path: str | Path) -> None:
    """Write the resolved config in the same ``key=value`` format it is read from."""
    Path(path).write_text("\n".join(config.resolved_lines()) + "\n", encoding="utf-8")
