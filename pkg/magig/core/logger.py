from loguru import logger

from magig.core.config import config

# One JSON-lines file for every level; the default stderr sink stays active
log_config = {
    "handlers": [
        {
            "sink": config.log_file,
            "rotation": config.log_rotation,
            "retention": config.log_rotation,
            "level": config.log_level,
            "serialize": True,
        }
    ]
}

for handler in log_config["handlers"]:
    logger.add(**handler)

__all__ = ["logger"]
