"""Run configuration schemas"""
import enum
from typing import Optional

from pydantic import BaseModel, Field, root_validator, validator

from ecgbench.core.config import settings
from ecgbench.models.network import ModelKind


class OptimizerKind(str, enum.Enum):
    """Optimizer enumeration"""
    SGD = "sgd"
    ADAM = "adam"


class NoiseSpec(BaseModel):
    """Gaussian noise augmentation"""
    sigma: float = Field(settings.NOISE_SIGMA, ge=0.0, description="Std-dev in normalized amplitude units")
    seed: int = Field(settings.DEFAULT_SEED, ge=0, description="Noise stream seed")


class SplitSpec(BaseModel):
    """Train/validation split"""
    train_fraction: float = Field(settings.TRAIN_FRACTION, gt=0.0, lt=1.0)
    stratified: bool = True
    seed: int = Field(settings.DEFAULT_SEED, ge=0)


class SmoteSpec(BaseModel):
    """SMOTE rebalancing of the training partition"""
    enabled: bool = True
    k_neighbors: int = Field(settings.SMOTE_K, ge=1)
    seed: int = Field(settings.DEFAULT_SEED, ge=0)


class TrainConfig(BaseModel):
    """Supervised training hyperparameters"""
    epochs: int = Field(settings.EPOCHS, ge=1)
    learning_rate: float = Field(settings.LEARNING_RATE, gt=0.0)
    batch_size: int = Field(settings.BATCH_SIZE, ge=1)
    optimizer: OptimizerKind = OptimizerKind(settings.OPTIMIZER)
    patience: int = Field(settings.PATIENCE, ge=0)
    min_delta: float = Field(settings.MIN_DELTA, ge=0.0)
    clip_norm: float = Field(settings.CLIP_NORM, ge=0.0, description="Global gradient-norm cap; 0 disables")
    seed: int = Field(settings.DEFAULT_SEED, ge=0)
    rbm_epochs: int = Field(settings.RBM_EPOCHS, ge=0, description="DBN layer-wise pretraining epochs")
    rbm_learning_rate: float = Field(settings.RBM_LEARNING_RATE, gt=0.0)


class DataSource(BaseModel):
    """Exactly one of a beat CSV path or a synthetic per-class count"""
    csv_path: Optional[str] = None
    synthetic_per_class: Optional[int] = Field(None, ge=1)
    synthetic_seed: int = Field(settings.DEFAULT_SEED, ge=0)

    @root_validator(skip_on_failure=True)
    def exactly_one_source(cls, values):
        has_csv = values.get("csv_path") is not None
        has_synth = values.get("synthetic_per_class") is not None
        if has_csv == has_synth:
            raise ValueError("Exactly one dataset source (csv path or synthetic spec) is required")
        return values

    @classmethod
    def parse_flag(cls, flag: str, seed: int) -> "DataSource":
        """``synth:N`` selects N synthetic beats per class; anything else is a CSV path"""
        if flag.startswith("synth:"):
            return cls(synthetic_per_class=int(flag.split(":", 1)[1]), synthetic_seed=seed)
        return cls(csv_path=flag, synthetic_seed=seed)

    def describe(self) -> str:
        if self.csv_path is not None:
            return self.csv_path
        return f"synth:{self.synthetic_per_class}@{self.synthetic_seed}"


class SeedManifest(BaseModel):
    """Every seed a run consumes, derived from one base seed"""
    base: int = Field(..., ge=0)
    data: int
    noise: int
    split: int
    smote: int
    init: int
    train: int
    pretrain: int

    @classmethod
    def from_base(cls, base: int) -> "SeedManifest":
        return cls(
            base=base,
            data=base,
            noise=base + 1,
            split=base + 2,
            smote=base + 3,
            init=base + 4,
            train=base + 5,
            pretrain=base + 6,
        )


class RunConfig(BaseModel):
    """Complete, self-describing configuration of one training run"""
    model: ModelKind
    data: DataSource
    noise: NoiseSpec = NoiseSpec()
    split: SplitSpec = SplitSpec()
    smote: SmoteSpec = SmoteSpec()
    train: TrainConfig = TrainConfig()
    output_dir: str = settings.OUTPUT_DIR
    seeds: SeedManifest

    @validator("output_dir")
    def output_dir_not_empty(cls, value):
        if not value:
            raise ValueError("output_dir must not be empty")
        return value

    @classmethod
    def from_seed(cls, model: ModelKind, data: DataSource, seed: int, **overrides) -> "RunConfig":
        """Build a config whose nested seeds all come from one seed manifest"""
        seeds = SeedManifest.from_base(seed)
        noise = overrides.pop("noise", NoiseSpec()).copy(update={"seed": seeds.noise})
        split = overrides.pop("split", SplitSpec()).copy(update={"seed": seeds.split})
        smote = overrides.pop("smote", SmoteSpec()).copy(update={"seed": seeds.smote})
        train = overrides.pop("train", TrainConfig()).copy(update={"seed": seeds.train})
        data = data.copy(update={"synthetic_seed": seeds.data})
        return cls(
            model=model, data=data, noise=noise, split=split, smote=smote,
            train=train, seeds=seeds, **overrides,
        )
