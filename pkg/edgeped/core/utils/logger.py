import logging
import sys
from termcolor import colored

from edgeped.runtime.config import LOG_LEVEL


def setup_logger(name="EdgePed", level=None):
    logger = logging.getLogger(name)
    logger.setLevel(level or LOG_LEVEL)

    if not logger.handlers:
        # stdout belongs to the CLI's JSON output
        handler = logging.StreamHandler(sys.stderr)
        formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s', datefmt='%H:%M:%S')
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    return logger


def set_level(level):
    """Apply a level to every logger created through setup_logger."""
    for name in list(logging.root.manager.loggerDict):
        if name == "EdgePed" or name.startswith("edgeped"):
            logging.getLogger(name).setLevel(level)


def log_step(step_name, message):
    """Helper for colorful step logging"""
    print(colored(f"\n[STEP: {step_name}]", "cyan", attrs=["bold"]), file=sys.stderr)
    print(f"{message}", file=sys.stderr)


def log_success(message):
    print(colored(f"✔ {message}", "green"), file=sys.stderr)


def log_error(message):
    print(colored(f"✖ {message}", "red"), file=sys.stderr)
