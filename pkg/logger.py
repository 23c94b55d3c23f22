# logger.py
import logging
import sys
import traceback
from pathlib import Path
from logging.handlers import RotatingFileHandler

LOG_NAME = "XYSqueeze"
LOG_FILE_NAME = "xysqueeze.log"


class Logger:
    """Application logging management"""
    def __init__(self, name=LOG_NAME):
        self.logger = logging.getLogger(name)
        self.setup_logger()

    def setup_logger(self):
        """Configure the console handler once per process"""
        # Prevent adding handlers multiple times
        if self.logger.handlers:
            return
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False

        console_formatter = logging.Formatter('%(levelname)s: %(message)s')

        # stdout carries CSV output of the couplings subcommand
        console_handler = UnicodeStreamHandler(sys.stderr)
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(console_formatter)
        self.logger.addHandler(console_handler)

    def attach_file(self, log_dir):
        """Add a rotating file handler under ``log_dir`` (idempotent).

        Parameters
        ----------
        log_dir : str or Path
            Directory receiving ``xysqueeze.log``.

        Returns
        -------
        Path
            Path of the log file.
        """
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / LOG_FILE_NAME

        for handler in self.logger.handlers:
            if isinstance(handler, RotatingFileHandler) and Path(handler.baseFilename) == log_file.resolve():
                return log_file

        file_formatter = logging.Formatter(
            '[%(asctime)s] %(levelname)s: %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=5*1024*1024,  # 5MB
            backupCount=3,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(file_formatter)
        self.logger.addHandler(file_handler)
        return log_file

    def set_console_level(self, level):
        """Change the console verbosity (file handlers keep DEBUG)"""
        for handler in self.logger.handlers:
            if isinstance(handler, UnicodeStreamHandler):
                handler.setLevel(level)

    def debug(self, message):
        """Log debug message"""
        self.logger.debug(message)

    def info(self, message):
        """Log info message"""
        self.logger.info(message)

    def warning(self, message):
        """Log warning message"""
        self.logger.warning(message)

    def error(self, message, exc_info=True):
        """Log error message"""
        self.logger.error(message, exc_info=exc_info)

    @staticmethod
    def format_error(e):
        """Format exception for logging"""
        return f"{type(e).__name__}: {str(e)}\n{traceback.format_exc()}"


class UnicodeStreamHandler(logging.StreamHandler):
    """A StreamHandler that ensures proper Unicode handling"""
    def __init__(self, stream=None):
        if stream is None:
            stream = sys.stderr
        super().__init__(stream)

    def emit(self, record):
        try:
            msg = self.format(record)
            stream = self.stream
            try:
                stream.write(msg + self.terminator)
            except UnicodeEncodeError:
                # If console can't handle the encoding, use a safe representation
                safe_msg = msg.encode('utf-8', errors='replace').decode('utf-8', errors='replace')
                stream.write(safe_msg + self.terminator)
            self.flush()
        except Exception:
            self.handleError(record)
