"""
    config.py
    ---------
    Implements the run configuration (smoother settings, seed, benchmark sizes),
    loaded from a "config.json" file with jsons.
"""

import os
from typing import List

import jsons

from crossfield.helper import CrossFieldError

# Configuration file shipped next to this module, used when the working directory has none
PACKAGED_CONFIG_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.json")

PROJECTION_METHODS = ("approx", "exact")
STOPPING_RULES = ("energy", "residual", "stall")


class ConfigError(CrossFieldError):
    """Raised for a missing, malformed or out-of-range configuration."""


class SmootherConfig:
    DEFAULT_ENERGY_REDUCTION_TARGET = 1e-4
    DEFAULT_MAX_ITERATIONS = 5000
    DEFAULT_REPORT_EVERY = 100
    DEFAULT_RELAXATION = 1.0

    def __init__(self,
                 energy_reduction_target: float = DEFAULT_ENERGY_REDUCTION_TARGET,
                 max_iterations: int = DEFAULT_MAX_ITERATIONS,
                 projection_method: str = "approx",
                 report_every: int = DEFAULT_REPORT_EVERY,
                 stopping_rule: str = "energy",
                 relaxation: float = DEFAULT_RELAXATION):
        self.energy_reduction_target = energy_reduction_target
        self.max_iterations = max_iterations
        self.projection_method = projection_method
        self.report_every = report_every
        self.stopping_rule = stopping_rule
        self.relaxation = relaxation

    def validate(self):
        """Raise ConfigError if a field is out of range."""

        if not 0.0 < self.energy_reduction_target < 1.0:
            raise ConfigError("energy_reduction_target must be in (0, 1), got " + str(self.energy_reduction_target))

        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1, got " + str(self.max_iterations))

        if self.projection_method not in PROJECTION_METHODS:
            raise ConfigError("projection_method must be one of " + str(PROJECTION_METHODS) +
                              ", got " + repr(self.projection_method))

        if self.report_every < 1:
            raise ConfigError("report_every must be at least 1, got " + str(self.report_every))

        if self.stopping_rule not in STOPPING_RULES:
            raise ConfigError("stopping_rule must be one of " + str(STOPPING_RULES) +
                              ", got " + repr(self.stopping_rule))

        if not 0.0 < self.relaxation <= 1.0:
            raise ConfigError("relaxation must be in (0, 1], got " + str(self.relaxation))

        return self


class RunConfig:
    DEFAULT_SEED = 42
    DEFAULT_ETA_LOW = 0.3
    DEFAULT_ETA_HIGH = 0.5

    def __init__(self,
                 seed: int = DEFAULT_SEED,
                 eta_band: List[float] = None,
                 recovery_samples: int = 10000,
                 projection_samples: int = 4000,
                 radius: float = 1.0,
                 smoother: SmootherConfig = None,
                 workers: int = 0):
        self.seed = seed
        self.eta_band = list(eta_band) if eta_band is not None else [RunConfig.DEFAULT_ETA_LOW,
                                                                     RunConfig.DEFAULT_ETA_HIGH]
        self.recovery_samples = recovery_samples
        self.projection_samples = projection_samples
        self.radius = radius
        self.smoother = smoother if smoother is not None else SmootherConfig()
        # Processes of the exact projection benchmark, 0 for one per CPU
        self.workers = workers

    def validate(self):
        """Raise ConfigError if a field is out of range."""

        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer, got " + str(self.seed))

        if len(self.eta_band) != 2 or not 0.0 <= self.eta_band[0] <= self.eta_band[1]:
            raise ConfigError("eta_band must be [low, high] with 0 <= low <= high, got " + str(self.eta_band))

        if self.recovery_samples < 1 or self.projection_samples < 1:
            raise ConfigError("sample counts must be positive")

        if self.radius < 0.0:
            raise ConfigError("radius must be non-negative, got " + str(self.radius))

        if self.workers < 0:
            raise ConfigError("workers must be non-negative, got " + str(self.workers))

        self.smoother.validate()
        return self

    def to_json(self):
        return jsons.dumps(self, strip_class_variables=True, jdkwargs={"indent": 4})


def load_configuration(path=None):
    """Load the run configuration.

    Without a path, "config.json" in the working directory is used if present, otherwise the
    configuration shipped with the package. An explicit path must exist and parse.
    """

    if path is None:
        path = os.path.join(os.getcwd(), "config.json")
        if not os.path.isfile(path):
            path = PACKAGED_CONFIG_FILE

    try:
        with open(path, 'r') as file:
            config = jsons.loads(file.read(), RunConfig)
    except OSError as e:
        raise ConfigError("Could not read configuration file " + str(path) + ": " + str(e)) from e
    except (jsons.exceptions.JsonsError, ValueError, TypeError) as e:
        raise ConfigError("Malformed configuration file " + str(path) + ": " + str(e)) from e

    return config.validate()
