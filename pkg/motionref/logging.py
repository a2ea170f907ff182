import io
import sys
import logging

__all__ = ["LoggingStream", "get_logger", "set_log_level", "configure_logging"]

# Get access to module level variables
this = sys.modules[__name__]

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

def get_logger(name=None, debug=False):
    """
    Return the package logger, or a child of it if name is given.

    The library itself never prints: until configure_logging is called the
    root logger only carries a NullHandler.
    """
    logging.captureWarnings(True)

    # Create a root logger the first time this module is called
    if getattr(this, "logger", None) is None:
        this.logger = logging.getLogger("mref")
        if debug:
            this.logger.setLevel(logging.DEBUG)
        else:
            this.logger.setLevel(logging.INFO)
        this.logger.addHandler(logging.NullHandler())

    if name is None:
        return this.logger
    return this.logger.getChild(name)

def configure_logging(level="INFO", log_file=None):
    """
    Attach a stream handler (and optionally a file handler) to the package
    root logger. Calling this twice replaces the previous handlers.
    """
    logger = get_logger()
    for handler in list(logger.handlers):
        if not isinstance(handler, logging.NullHandler):
            logger.removeHandler(handler)
            handler.close()

    log_format = logging.Formatter(LOG_FORMAT)
    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(log_format)
    logger.addHandler(stream_handler)

    if log_file is not None:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(log_format)
        logger.addHandler(file_handler)

    logger.setLevel(level)
    return logger

def set_log_level(level="INFO", name=None):
    """
    Set the log level for a given module (name) to the level.
    """
    # Get the logger
    logger = get_logger(name)
    logger.setLevel(level)
    get_logger().debug("Set log level of %r to %r", logger, level)

class LoggingStream(io.IOBase):
    """
    Implement a stream handler that redirects all writes to a logger.

    Used as the file argument of tqdm so that progress ends up in the run log
    instead of the terminal.
    """

    def __init__(self, logger, level="info"):
        """
        Store the logger to which we pass all output.
        """
        super().__init__()
        if not isinstance(logger, logging.Logger):
            raise TypeError(f"logger must be a Logger. Is a {type(logger)}.")

        self.logger = logger
        self.level = level

    def readable(self):
        """
        Can't read from a logger
        """
        return False

    def writable(self):
        """
        Can write to a logger
        """
        return True

    def write(self, msg):
        msg = msg.strip("\r\n")
        if msg:
            getattr(self.logger, self.level)(msg)
        return len(msg)
