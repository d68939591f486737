import logging
import sys
from typing import Optional, TextIO

from pydantic import ValidationError


class FwdSmileError(Exception):
    """Base class for every error raised by the library."""


class ParameterError(FwdSmileError, ValueError):
    """Invalid model parameters or inputs."""


class UnsupportedError(FwdSmileError):
    """Model, regime or measure combination the expansions do not cover."""


class NumericalError(FwdSmileError):
    """A numerical procedure could not deliver a reliable value."""


class ExplosionError(NumericalError):
    """The forward lmgf is infinite at a real argument."""

    def __init__(self, message: str, z: Optional[complex] = None):
        super().__init__(message)
        self.z = z


class DomainError(NumericalError):
    """Argument outside the domain of an exponent or clock."""

    def __init__(self, message: str, z: Optional[complex] = None):
        super().__init__(message)
        self.z = z


class MartingaleError(NumericalError):
    """The exponent or limit lmgf does not vanish at one."""


class RegularityError(NumericalError):
    """The limit lmgf has a non-zero slope at the origin."""


class SingularStrikeError(NumericalError):
    """Strike at (or within the guard band of) a singular point of the expansion."""


class BoundarySaturationError(NumericalError):
    """The saddlepoint equation has no root before the domain boundary."""

    def __init__(self, message: str, side: str):
        super().__init__(message)
        self.side = side


class BoundaryClearanceError(NumericalError):
    """A finite-difference stencil cannot fit inside the domain."""


class StripError(NumericalError):
    """Fourier damping outside the strip of finiteness."""


class QuadratureError(NumericalError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: Optional[float] = None):
        super().__init__(message)
        self.estimate = estimate


class ImpliedVolBandError(NumericalError):
    """Price outside the open no-arbitrage band."""


class ConvergenceError(NumericalError):
    """Root bracket exhausted without convergence."""


class ErrorHandler:
    """Centralized error handling for the command line."""

    # Error message templates
    ERROR_MESSAGES = {
        ValidationError: {
            "prefix": "config:",
            "user_message": "Invalid configuration: {error}",
            "log_level": logging.WARNING,
            "exit_code": 2,
        },
        ParameterError: {
            "prefix": "config:",
            "user_message": "Invalid parameters: {error}",
            "log_level": logging.WARNING,
            "exit_code": 2,
        },
        ValueError: {
            "prefix": "config:",
            "user_message": "Invalid input: {error}",
            "log_level": logging.WARNING,
            "exit_code": 2,
        },
        OSError: {
            "prefix": "config:",
            "user_message": "Cannot read or write a file: {error}",
            "log_level": logging.WARNING,
            "exit_code": 2,
        },
        UnsupportedError: {
            "prefix": "unsupported:",
            "user_message": "{error}",
            "log_level": logging.WARNING,
            "exit_code": 3,
        },
        NumericalError: {
            "prefix": "numerical:",
            "user_message": "Numerical failure: {error}",
            "log_level": logging.ERROR,
            "exit_code": 4,
        },
        Exception: {
            "prefix": "error:",
            "user_message": "An unexpected error occurred: {error}",
            "log_level": logging.ERROR,
            "exit_code": 4,
        },
    }

    @classmethod
    def _config_for(cls, error: BaseException) -> dict:
        for klass in type(error).__mro__:
            if klass in cls.ERROR_MESSAGES:
                return cls.ERROR_MESSAGES[klass]
        return cls.ERROR_MESSAGES[Exception]

    @classmethod
    def handle_error(
        cls,
        error: Exception,
        context: str,
        show_details: bool = False,
        stream: Optional[TextIO] = None,
    ) -> int:
        """Log an error, report it on stderr and map it to an exit code.

        Args:
            error: The exception that occurred
            context: Context description (e.g., "loading config", "building smile")
            show_details: Whether to print the raw error text instead of the template
            stream: Where the user message goes (default stderr)

        Returns:
            Process exit code for the error category
        """
        config = cls._config_for(error)

        log_message = f"Error during {context}: {str(error)}"
        if config["log_level"] == logging.ERROR:
            logging.error(log_message, exc_info=True)
        else:
            logging.log(config["log_level"], log_message)

        print(cls.get_error_message(error, show_details), file=stream or sys.stderr)
        return config["exit_code"]

    @classmethod
    def get_error_message(cls, error: Exception, show_details: bool = False) -> str:
        """Get formatted error message without printing it.

        Args:
            error: The exception that occurred
            show_details: Whether to include error details

        Returns:
            Formatted error message string
        """
        config = cls._config_for(error)

        if show_details:
            return f"{config['prefix']} {str(error)}"
        return f"{config['prefix']} {config['user_message'].format(error=str(error))}"

    @classmethod
    def exit_code_for(cls, error: Exception) -> int:
        return cls._config_for(error)["exit_code"]
