from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    app_name: str = "magig"
    app_env: str = "local"

    # Logging
    log_file: str = "logs/magig.log"
    log_level: str = "INFO"
    log_rotation: str = "2 weeks"

    # Output
    output_dir: str = "runs"
    workers: int = 1

    # Attribution defaults
    steps: int = 200
    gig_fraction: float = 0.1
    magig_fraction: float = 0.05
    eta: float = 0.2

    # Training gates
    accuracy_floor: float = 0.9
    mse_ceiling: float = 1e-2

    # Geometry
    on_manifold_tol: float = 1e-9
    distance_grid: int = 10_000
    golden_steps: int = 20

    # Evaluation
    diffid_levels: int = 21

    model_config = SettingsConfigDict(env_file=".env", env_prefix="MAGIG_", extra="allow")

config = Settings()
