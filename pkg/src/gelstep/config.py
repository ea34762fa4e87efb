"""Run configuration: a sectioned key = value format and its loader.

The format is deliberately plain so configs stay diffable:

    # comment
    [grid]
    n = 17
    dirichlet = both

    [initial]
    psi = noise
    amplitude = 0.05

Unknown sections or keys, duplicate keys, and unparseable values raise
ParseError with the offending line number.  Every key is optional;
defaults that were filled in are listed on RunConfig.echo so run logs
can show the fully resolved configuration.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .boundary import AffineFamily, DirichletFamily, GentleBendFamily, IdentityFamily
from .errors import ParseError, ValidationError
from .grid import Grid
from .potentials import PotentialParams
from .solver import SolverConfig, initial_concentration

_MATERIAL_KEYS = {
    f.name: float
    for f in dataclasses.fields(PotentialParams)
    if f.name not in ("d", "viscous_tensor")
}

_SOLVER_KEYS = {
    "grad_tol": float,
    "max_iters": int,
    "armijo_c": float,
    "backtrack_factor": float,
    "memory": int,
    "det_floor": float,
}

_SCHEMA: dict[str, dict[str, type]] = {
    "grid": {"d": int, "n": int, "dirichlet": str},
    "time": {"t_final": float, "num_steps": int},
    "material": {**_MATERIAL_KEYS, "viscous_rate": str},
    "boundary": {
        "family": str,
        "amplitude": float,
        "frequency": float,
        "stretch": float,
        "shear": float,
    },
    "initial": {
        "psi": str,
        "mean": float,
        "amplitude": float,
        "seed": int,
        "y": str,
    },
    "solver": _SOLVER_KEYS,
    "output": {"dir": str, "snapshot_every": int, "threads": int},
    "verify": {"edi": bool, "residuals": bool, "apriori": bool, "seed": int, "tests": int},
}

_FAMILIES = ("identity", "bend", "affine")
_PSI_KINDS = ("constant", "noise", "stripe")


@dataclass
class RunConfig:
    """Fully resolved settings for one simulation.

    The make_* methods build the live objects the solver consumes; the
    scalar fields stay plain so dataclasses.replace can rescale a
    configuration for refinement ladders.
    """

    d: int = 2
    n: int = 17
    dirichlet: str = "both"
    t_final: float = 0.5
    num_steps: int = 16
    material: dict = field(default_factory=dict)
    viscous_rate: str = "composed"
    family: str = "identity"
    boundary: dict = field(default_factory=dict)
    psi_kind: str = "constant"
    psi_mean: float = 0.0
    psi_amplitude: float = 0.1
    psi_seed: int = 0
    y_init: str = "identity"
    solver: dict = field(default_factory=dict)
    out_dir: str = "out"
    snapshot_every: int = 1
    threads: int = 1
    verify_edi: bool = True
    verify_residuals: bool = True
    verify_apriori: bool = True
    verify_seed: int = 0
    verify_tests: int = 20
    echo: list = field(default_factory=list)

    def __post_init__(self):
        if self.dirichlet in ("none", "empty", ""):
            raise ValidationError(
                "the Dirichlet set must be nonempty: the scheme pins y = id "
                "on at least one face (dirichlet = min, max, both, or all)"
            )
        if self.dirichlet not in ("min", "max", "both", "all"):
            raise ValidationError(
                f"dirichlet must be min, max, both, or all, got {self.dirichlet!r}"
            )
        if self.d not in (2, 3):
            raise ValidationError(f"d must be 2 or 3, got {self.d}")
        if self.n < 5:
            raise ValidationError(f"n must be at least 5, got {self.n}")
        if self.t_final <= 0.0:
            raise ValidationError(f"t_final must be positive, got {self.t_final}")
        if self.num_steps < 1:
            raise ValidationError(f"num_steps must be at least 1, got {self.num_steps}")
        if self.snapshot_every < 1:
            raise ValidationError(
                f"snapshot_every must be at least 1, got {self.snapshot_every}"
            )
        if self.threads < 0:
            raise ValidationError(f"threads must be nonnegative, got {self.threads}")
        if self.viscous_rate not in ("composed", "raw"):
            raise ValidationError(
                f"viscous_rate must be composed or raw, got {self.viscous_rate!r}"
            )
        if self.family not in _FAMILIES:
            raise ValidationError(
                f"family must be one of {', '.join(_FAMILIES)}, got {self.family!r}"
            )
        if self.psi_kind not in _PSI_KINDS:
            raise ValidationError(
                f"initial psi must be one of {', '.join(_PSI_KINDS)}, "
                f"got {self.psi_kind!r}"
            )
        # force the exponent-chain validation now, not at first use
        self.make_params()
        self.make_solver_config()

    # -- factories -------------------------------------------------------

    def make_grid(self) -> Grid:
        return Grid(self.d, self.n, dirichlet=self.dirichlet)

    def make_params(self) -> PotentialParams:
        return PotentialParams(d=self.d, **self.material)

    def make_family(self) -> DirichletFamily:
        b = dict(self.boundary)
        horizon = self.t_final
        if self.family == "identity":
            return IdentityFamily(d=self.d, horizon=horizon)
        if self.family == "bend":
            return GentleBendFamily(
                amplitude=b.get("amplitude", 0.02),
                frequency=b.get("frequency", 1.0),
                d=self.d,
                horizon=horizon,
            )
        rate = np.zeros((self.d, self.d))
        rate[0, 0] = b.get("stretch", 0.05)
        rate[0, 1] = b.get("shear", 0.0)
        return AffineFamily(rate, d=self.d, horizon=horizon)

    def make_solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    def make_initial_psi(self, grid: Grid) -> np.ndarray:
        return initial_concentration(
            grid,
            kind=self.psi_kind,
            mean=self.psi_mean,
            amplitude=self.psi_amplitude,
            seed=self.psi_seed,
        )

    def make_initial_y(
        self, grid: Grid, family=None, params=None, psi=None, solver=None
    ) -> np.ndarray:
        if self.y_init == "identity":
            return grid.identity_map()
        if self.y_init == "relaxed":
            if family is None or params is None or psi is None:
                raise ValidationError(
                    "y_init = relaxed needs the boundary family, material "
                    "parameters, and initial concentration to minimize against"
                )
            from .solver import relax_deformation

            return relax_deformation(params, grid, family, psi, cfg=solver)
        from .snapshots import read_snapshot

        header, fields = read_snapshot(self.y_init)
        if header["d"] != self.d or header["n"] != self.n:
            raise ValidationError(
                f"initial-state file {self.y_init!r} was written for "
                f"d = {header['d']}, n = {header['n']}; this run uses "
                f"d = {self.d}, n = {self.n}"
            )
        return fields["y"]

    def resolved_lines(self) -> list[str]:
        """The full configuration as config-file lines (for run logs)."""
        lines = []
        sections = {
            "grid": {"d": self.d, "n": self.n, "dirichlet": self.dirichlet},
            "time": {"t_final": self.t_final, "num_steps": self.num_steps},
            "material": {
                **{
                    f.name: self.material.get(f.name, f.default)
                    for f in dataclasses.fields(PotentialParams)
                    if f.name in _MATERIAL_KEYS
                },
                "viscous_rate": self.viscous_rate,
            },
            "boundary": {"family": self.family, **self.boundary},
            "initial": {
                "psi": self.psi_kind,
                "mean": self.psi_mean,
                "amplitude": self.psi_amplitude,
                "seed": self.psi_seed,
                "y": self.y_init,
            },
            "solver": {
                f.name: self.solver.get(f.name, f.default)
                for f in dataclasses.fields(SolverConfig)
            },
            "output": {
                "dir": self.out_dir,
                "snapshot_every": self.snapshot_every,
                "threads": self.threads,
            },
            "verify": {
                "edi": self.verify_edi,
                "residuals": self.verify_residuals,
                "apriori": self.verify_apriori,
                "seed": self.verify_seed,
                "tests": self.verify_tests,
            },
        }
        for name, keys in sections.items():
            lines.append(f"[{name}]")
            for key, value in keys.items():
                lines.append(f"{key} = {value}")
            lines.append("")
        return lines


def _convert(value: str, target: type, lineno: int, key: str):
    if target is bool:
        low = value.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ParseError(f"line {lineno}: key {key!r} expects a boolean, got {value!r}")
    if target is int:
        try:
            return int(value)
        except ValueError:
            raise ParseError(
                f"line {lineno}: key {key!r} expects an integer, got {value!r}"
            ) from None
    if target is float:
        try:
            return float(value)
        except ValueError:
            raise ParseError(
                f"line {lineno}: key {key!r} expects a number, got {value!r}"
            ) from None
    return value


def parse_config(text: str) -> RunConfig:
    """Parse sectioned key = value text into a RunConfig.

    Raises ParseError (with the line number) for structural problems
    and ValidationError for well-formed but inadmissible settings such
    as an exponent chain violating the coercivity assumptions or an
    empty Dirichlet set.
    """
    data: dict[tuple[str, str], object] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ParseError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        if section is None:
            raise ParseError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if key not in _SCHEMA[section]:
            raise ParseError(f"line {lineno}: unknown key {key!r} in [{section}]")
        if (section, key) in data:
            raise ParseError(f"line {lineno}: duplicate key {key!r} in [{section}]")
        data[(section, key)] = _convert(value, _SCHEMA[section][key], lineno, key)

    present = set(data.keys())

    def take(section: str, key: str, default):
        return data.pop((section, key), default)

    kwargs = {
        "d": take("grid", "d", 2),
        "n": take("grid", "n", 17),
        "dirichlet": take("grid", "dirichlet", "both"),
        "t_final": take("time", "t_final", 0.5),
        "num_steps": take("time", "num_steps", 16),
        "viscous_rate": take("material", "viscous_rate", "composed"),
        "family": take("boundary", "family", "identity"),
        "psi_kind": take("initial", "psi", "constant"),
        "psi_mean": take("initial", "mean", 0.0),
        "psi_amplitude": take("initial", "amplitude", 0.1),
        "psi_seed": take("initial", "seed", 0),
        "y_init": take("initial", "y", "identity"),
        "out_dir": take("output", "dir", "out"),
        "snapshot_every": take("output", "snapshot_every", 1),
        "threads": take("output", "threads", 1),
        "verify_edi": take("verify", "edi", True),
        "verify_residuals": take("verify", "residuals", True),
        "verify_apriori": take("verify", "apriori", True),
        "verify_seed": take("verify", "seed", 0),
        "verify_tests": take("verify", "tests", 20),
    }
    kwargs["material"] = {
        key: val for (sec, key), val in data.items() if sec == "material"
    }
    kwargs["boundary"] = {
        key: val for (sec, key), val in data.items() if sec == "boundary"
    }
    kwargs["solver"] = {key: val for (sec, key), val in data.items() if sec == "solver"}

    cfg = RunConfig(**kwargs)

    resolved = {}
    for block in cfg.resolved_lines():
        if block.startswith("["):
            sec = block[1:-1]
        elif "=" in block:
            key, _, value = block.partition("=")
            resolved[(sec, key.strip())] = value.strip()
    cfg.echo = [
        f"{sec}.{key} = {resolved[(sec, key)]} (default)"
        for sec in _SCHEMA
        for key in _SCHEMA[sec]
        if (sec, key) not in present and (sec, key) in resolved
    ]
    return cfg


def load_config(path: str) -> RunConfig:
    """Read and parse a configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
