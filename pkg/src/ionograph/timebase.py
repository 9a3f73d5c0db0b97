"""Time conventions shared across the pipeline.

Epochs are integer seconds from a fixed scenario reference (taken as
midnight UTC on a 1 January). Raw observations run at 30 s cadence, the
model grid at 5 min.
"""

RAW_CADENCE_S = 30
MODEL_CADENCE_S = 300
DAYS_PER_YEAR = 365.25


def day_of_year_frac(epoch_s: int | float) -> float:
    """Continuous day-of-year in [0, 365.25) for cyclical encoding."""
    return (epoch_s / 86400.0) % DAYS_PER_YEAR


def is_aligned(epoch_s: int, cadence_s: int) -> bool:
    return epoch_s >= 0 and epoch_s % cadence_s == 0
