import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()

# c_hat of configs/ensemble_a.conf (0.091996...), rounded up. Regenerate with
# `stability calibrate --config configs/ensemble_a.conf`.
CALIBRATED_C = 0.092


def is_enabled(value: str) -> bool:
    return value.lower() in ["1", "t", "true", "y", "yes"]


class Config(BaseModel):
    log_level: str
    # bound constant used when a caller passes no c
    default_c: float = Field(gt=0)
    workers: int = Field(ge=1)
    numba_cache: bool


config = Config(
    log_level=os.getenv("LOG_LEVEL", "INFO"),
    default_c=float(os.getenv("STABILITY_DEFAULT_C", str(CALIBRATED_C))),
    workers=int(os.getenv("STABILITY_WORKERS", "1")),
    numba_cache=is_enabled(os.getenv("STABILITY_NUMBA_CACHE", "yes")),
)
