import os
from pydantic import BaseModel
from dotenv import load_dotenv
load_dotenv()


class Settings(BaseModel):
    # Logging
    log_level: str = os.getenv("RSENV_LOG_LEVEL", "INFO")

    # Experiment runner
    run_workers: int = int(os.getenv("RSENV_RUN_WORKERS", "4"))
    output_dir: str = os.getenv("RSENV_OUTPUT_DIR", "./runs")

    # Manifest authoring defaults (never read when building from a manifest)
    default_slate_k: int = int(os.getenv("RSENV_SLATE_K", "1"))
    default_episode_length_max: int = int(os.getenv("RSENV_EPISODE_LENGTH_MAX", "1000"))

    # Reward curve size in inches
    chart_width: float = float(os.getenv("RSENV_CHART_WIDTH", "6.0"))
    chart_height: float = float(os.getenv("RSENV_CHART_HEIGHT", "4.0"))


settings = Settings()
