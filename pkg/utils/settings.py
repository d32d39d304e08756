import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv


@dataclass(frozen=True)
class Settings:
    log_level: str
    log_file: str
    port: int
    output_dir: str


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Environment settings, read once from the process environment and .env."""
    load_dotenv()
    return Settings(
        log_level=os.getenv("TRAFFIC_LOG_LEVEL", "INFO").upper(),
        log_file=os.getenv("TRAFFIC_LOG_FILE", "traffic_rbpf.log"),
        port=int(os.getenv("PORT", 8000)),
        output_dir=os.getenv("TRAFFIC_OUTPUT_DIR", "runs"),
    )
