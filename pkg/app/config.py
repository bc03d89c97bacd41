"""Runtime settings read from TIES_* environment variables or a .env file."""
from pydantic_settings import BaseSettings, SettingsConfigDict

class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "auto"  # auto, json or console

    # Execution
    THREADS: int = 1
    SEED: int = 42

    # Interaction binning and autocorrelation
    BIN_SECONDS: int = 600
    TAU_MAX: int = 1008  # one week of 10-minute bins
    FFT_CROSSOVER: int = 64

    # Learning and evaluation
    FOLDS: int = 5
    PERMUTATIONS: int = 10
    MIN_LEAF: int = 20
    MAX_DEPTH: int = 10
    TREE_REPEATS: int = 3
    LOGISTIC_MAX_ITER: int = 100
    LOGISTIC_TOL: float = 1e-10
    NORMALIZATION_SAMPLE: int = 200

    # Network inference
    EPSILON_KL: float = 1e-10
    MAX_THRESHOLD_CANDIDATES: int = 512

    model_config = SettingsConfigDict(env_prefix="TIES_", env_file=".env", extra="ignore")

settings = Settings()
