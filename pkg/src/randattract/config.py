"""Run configuration: flat key-value text with section headers.

Sections [noise], [field], [problem], [experiment]; every parameter constraint
from the owning module is re-validated at load time and rejected configs name
the violated constraint.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigurationError
from .noise import NoiseSpectrum
from .operators import DiffusionField, FractionalNormSpec
from .pathwise import NonlinearitySpec, SemilinearProblem

_DEFAULTS = {
    "noise": {
        "modes": "16",
        "decay_exponent": "1.0",
        "sigma": "0.1",
        "dt": "0.00390625",
        "seed": "12345",
        "n_paths": "16",
    },
    "field": {
        "delta": "0.5",
        "amp": "0.2",
        "kappa": "1.0",
        "driver_horizon": "8.0",
        "galerkin_dim": "64",
        "alpha": "0.2",
        "eta": "0.35",
        "beta": "0.2",
    },
    "problem": {
        "nonlinearity": "cubic_fisher",
        "forcing": "zero",
        "u0": "zero",
        "blowup_threshold": "1e6",
    },
    "experiment": {
        "horizons": "1,2,4,8",
        "gammas": "0.1",
        "levels": "3",
        "truncation_horizon": "8.0",
        "horizon": "1.0",
        "ensemble_size": "33",
        "ball_radius": "2.0",
        "temperedness_horizon": "100.0",
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters for one CLI run."""

    modes: int
    decay_exponent: float
    sigma: float
    dt: float
    seed: int
    n_paths: int
    delta: float
    amp: float
    kappa: float
    driver_horizon: float
    galerkin_dim: int
    alpha: float
    eta: float
    beta: float
    nonlinearity: str
    forcing: str
    u0: str
    blowup_threshold: float
    horizons: tuple[float, ...]
    gammas: tuple[float, ...]
    levels: int
    truncation_horizon: float
    horizon: float
    ensemble_size: int
    ball_radius: float
    temperedness_horizon: float
    raw_text: str = dc_field(repr=False, default="")

    def spectrum(self) -> NoiseSpectrum:
        return NoiseSpectrum(self.modes, self.decay_exponent)

    def field(self) -> DiffusionField:
        return DiffusionField(
            delta=self.delta,
            amp=self.amp,
            driver_decay=self.kappa,
            driver_horizon=self.driver_horizon,
        )

    def nonlinearity_spec(self) -> NonlinearitySpec:
        table = {
            "zero": NonlinearitySpec.zero,
            "cubic_fisher": NonlinearitySpec.cubic_fisher,
            "pure_cubic": NonlinearitySpec.pure_cubic,
        }
        if self.nonlinearity not in table:
            raise ConfigurationError(
                f"problem.nonlinearity must be one of {sorted(table)}"
            )
        return table[self.nonlinearity]()

    def coefficient_vector(self, spec_text: str) -> np.ndarray:
        """Parse 'zero' | 'mode:<n>:<amp>' | 'random:<radius>' into coefficients."""
        m = self.galerkin_dim
        if spec_text == "zero":
            return np.zeros(m)
        parts = spec_text.split(":")
        if parts[0] == "mode" and len(parts) == 3:
            n, amp = int(parts[1]), float(parts[2])
            if not 1 <= n <= m:
                raise ConfigurationError("mode index outside 1..galerkin_dim")
            out = np.zeros(m)
            out[n - 1] = amp
            return out
        if parts[0] == "random" and len(parts) == 2:
            radius = float(parts[1])
            rng = np.random.default_rng([self.seed, 999])
            g = rng.standard_normal(m)
            return g * (radius / float(np.linalg.norm(g)))
        raise ConfigurationError(
            f"cannot parse coefficient spec {spec_text!r} "
            "(use zero | mode:<n>:<amp> | random:<radius>)"
        )

    def problem(self) -> SemilinearProblem:
        return SemilinearProblem(
            field=self.field(),
            nonlinearity=self.nonlinearity_spec(),
            forcing=(
                None
                if self.forcing == "zero"
                else self.coefficient_vector(self.forcing)
            ),
            sigma=self.sigma,
            u0=self.coefficient_vector(self.u0),
            blowup_threshold=self.blowup_threshold,
            norm_spec=FractionalNormSpec(alpha=self.alpha),
        )

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    def canonical_text(self) -> str:
        rows = []
        for key, value in sorted(self.__dict__.items()):
            if key == "raw_text":
                continue
            rows.append(f"{key}={value!r}")
        return "\n".join(rows)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    parser = configparser.ConfigParser()
    parser.read_dict(_DEFAULTS)
    raw = ""
    if path is not None:
        with open(path) as fh:
            raw = fh.read()
        try:
            parser.read_string(raw)
        except configparser.Error as exc:
            raise ConfigurationError(f"cannot parse config: {exc}") from exc
    if overrides:
        for (section, key), value in overrides.items():
            parser.set(section, key, str(value))
    try:
        cfg = RunConfig(
            modes=parser.getint("noise", "modes"),
            decay_exponent=parser.getfloat("noise", "decay_exponent"),
            sigma=parser.getfloat("noise", "sigma"),
            dt=parser.getfloat("noise", "dt"),
            seed=parser.getint("noise", "seed"),
            n_paths=parser.getint("noise", "n_paths"),
            delta=parser.getfloat("field", "delta"),
            amp=parser.getfloat("field", "amp"),
            kappa=parser.getfloat("field", "kappa"),
            driver_horizon=parser.getfloat("field", "driver_horizon"),
            galerkin_dim=parser.getint("field", "galerkin_dim"),
            alpha=parser.getfloat("field", "alpha"),
            eta=parser.getfloat("field", "eta"),
            beta=parser.getfloat("field", "beta"),
            nonlinearity=parser.get("problem", "nonlinearity"),
            forcing=parser.get("problem", "forcing"),
            u0=parser.get("problem", "u0"),
            blowup_threshold=parser.getfloat("problem", "blowup_threshold"),
            horizons=_floats(parser.get("experiment", "horizons")),
            gammas=_floats(parser.get("experiment", "gammas")),
            levels=parser.getint("experiment", "levels"),
            truncation_horizon=parser.getfloat("experiment", "truncation_horizon"),
            horizon=parser.getfloat("experiment", "horizon"),
            ensemble_size=parser.getint("experiment", "ensemble_size"),
            ball_radius=parser.getfloat("experiment", "ball_radius"),
            temperedness_horizon=parser.getfloat("experiment", "temperedness_horizon"),
            raw_text=raw,
        )
    except ValueError as exc:
        raise ConfigurationError(f"malformed config value: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    """Re-check every owning-module constraint, naming the violated one."""
    if cfg.modes < 1:
        raise ConfigurationError("noise.modes must be a positive integer")
    if not cfg.decay_exponent > 0.5:
        raise ConfigurationError(
            "noise.decay_exponent must be > 1/2 (trace-class covariance)"
        )
    if cfg.sigma < 0:
        raise ConfigurationError("noise.sigma must be nonnegative")
    if not cfg.dt > 0:
        raise ConfigurationError("noise.dt must be positive")
    if cfg.n_paths < 1:
        raise ConfigurationError("noise.n_paths must be a positive integer")
    if not cfg.delta > 0:
        raise ConfigurationError("field.delta must be positive")
    if cfg.amp < 0:
        raise ConfigurationError("field.amp must be nonnegative")
    if cfg.amp * 2.0 >= cfg.delta:
        raise ConfigurationError(
            "uniform ellipticity violated: field.amp*sup|g| must be < field.delta"
        )
    if not (cfg.kappa > 0 and cfg.driver_horizon > 0):
        raise ConfigurationError("field.kappa and field.driver_horizon must be positive")
    if cfg.galerkin_dim < 1:
        raise ConfigurationError("field.galerkin_dim must be a positive integer")
    if cfg.modes > cfg.galerkin_dim:
        raise ConfigurationError("noise.modes must not exceed field.galerkin_dim")
    if not -0.5 <= cfg.alpha < 1.0:
        raise ConfigurationError("field.alpha must lie in [-1/2, 1)")
    if not 0.0 <= cfg.beta < 0.5:
        raise ConfigurationError("field.beta must lie in [0, 1/2)")
    if not (cfg.eta > cfg.alpha and cfg.eta + cfg.alpha < 1.0):
        raise ConfigurationError(
            "field.eta must satisfy eta > alpha and eta + alpha < 1"
        )
    if not cfg.blowup_threshold > 0:
        raise ConfigurationError("problem.blowup_threshold must be positive")
    if list(cfg.horizons) != sorted(cfg.horizons) or not cfg.horizons:
        raise ConfigurationError("experiment.horizons must be increasing and nonempty")
    if cfg.levels < 1:
        raise ConfigurationError("experiment.levels must be >= 1")
    if not cfg.truncation_horizon > 0:
        raise ConfigurationError("experiment.truncation_horizon must be positive")
    if cfg.ensemble_size < 1:
        raise ConfigurationError("experiment.ensemble_size must be >= 1")


def example_config() -> str:
    parser = configparser.ConfigParser()
    parser.read_dict(_DEFAULTS)
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()
