"""Application configuration using Pydantic Settings"""
from pydantic import BaseSettings


class Settings(BaseSettings):
    """Defaults for every run, overridable from environment variables or .env"""

    # App
    APP_NAME: str = "ECG Bench"
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "runs"
    DEFAULT_SEED: int = 7

    # Beat format
    NUM_FEATURES: int = 187
    NUM_CLASSES: int = 5

    # Data pipeline
    NOISE_SIGMA: float = 0.05  # normalized amplitude units
    SMOTE_K: int = 5
    TRAIN_FRACTION: float = 0.8

    # Training
    EPOCHS: int = 15
    BATCH_SIZE: int = 32
    LEARNING_RATE: float = 1e-3
    OPTIMIZER: str = "adam"  # adam or sgd
    PATIENCE: int = 5
    MIN_DELTA: float = 1e-4
    CLIP_NORM: float = 5.0  # global gradient L2 cap, 0 disables

    # DBN pretraining
    RBM_EPOCHS: int = 5
    RBM_LEARNING_RATE: float = 0.05

    # Benchmarking
    LATENCY_REPEATS: int = 3
    ACCELERATOR_CLOCK_HZ: float = 100e6
    ACCELERATOR_ARRAY: str = "8x8"
    ACCELERATOR_EFFICIENCY: float = 1.0

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
