from .logger import setup_logger, set_level, log_step, log_success, log_error
