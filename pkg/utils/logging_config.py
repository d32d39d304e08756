import logging
from typing import Optional

from utils.settings import get_settings

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Send records to stderr and to the run log file; explicit arguments win over the environment."""
    settings = get_settings()
    handlers = [logging.StreamHandler()]
    target = log_file if log_file is not None else settings.log_file
    if target:
        handlers.append(logging.FileHandler(target))
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
