from pathlib import Path

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Logging
    log_level: str = "INFO"
    json_logging: bool = False

    # Memory caps for paths that materialize N×N matrices
    matrix_form_max_nodes: int = 4096
    dense_max_nodes: int = 8192

    # A_lap degree guard
    degree_epsilon: float = 1e-12

    # Verification
    equivalence_tolerance: float = 1e-10
    dense_oracle_tolerance: float = 1e-12
    gradient_tolerance: float = 1e-6
    fd_step: float = 1e-5
    kink_margin: float = 1e-4
    grad_floor: float = 1e-3  # FD instances with a smaller nonzero gradient entry are resampled

    # Benchmarks
    bench_repeats: int = 5
    bench_threads: int = 1
    dense_block_rows: int = 256  # the dense benchmark always times row blocks of this height

    default_seed: int = 0

    # Paths
    base_dir: Path = Path(__file__).resolve().parent.parent
    presets_yaml_path: Path = Path(__file__).resolve().parent / "presets.yaml"

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }


settings = Settings()
