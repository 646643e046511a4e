"""
Progress logging that can be silenced per category without touching log levels.

Categories: `training` (per epoch), `inference` (per utterance), `experiment`
(per condition). Unknown or missing categories follow only the master switch.
"""

import logging

from app.core.config import settings

_CATEGORY_SWITCHES = {
    "training": "FLOW_LOGS_TRAINING_ENABLED",
    "inference": "FLOW_LOGS_INFERENCE_ENABLED",
    "experiment": "FLOW_LOGS_EXPERIMENT_ENABLED",
}


def flow_enabled(category: str | None) -> bool:
    if not settings.FLOW_LOGS_ENABLED:
        return False
    switch = _CATEGORY_SWITCHES.get(category or "")
    return True if switch is None else bool(getattr(settings, switch))


def flow_info(
    logger: logging.Logger,
    msg: str,
    *args,
    category: str | None = None,
    **kwargs,
) -> None:
    if flow_enabled(category) and logger.isEnabledFor(logging.INFO):
        logger.info(msg, *args, **kwargs)
