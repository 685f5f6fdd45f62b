"""Flat ``key=value`` run configuration.

Recognised keys (anything else is an error)::

    n_particles          integer N >= 2
    field_strength       E >= 0
    t_final              T > 0
    sample_times         comma separated, strictly increasing, within [0, T]
                         (default: 11 evenly spaced points on [0, T])
    initial_distribution gaussian:MEAN:VAR | uniform:LO:HI | two_point:A:B:PROB_A
    project_to_sphere    true | false | auto (auto: on unless the process is quenched)
    replicas             R >= 1
    master_seed          unsigned 64-bit integer
    quenched_init        empirical | distributional
    process              interacting | quenched   (simulate, chaos-sweep, limit-check)
    snapshots            true | false             (write velocity snapshot files)
    sweep_n              comma separated N values (chaos-sweep, coupling-sweep)
    phi, psi             test function ids: v, v2, sin, tanh, min1v2
    symmetrize           true | false             (chaos-sweep pair symmetrization)
    u_hat                energy used by ``bounds``
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigError, InitialDistribution, SimConfig
from .diagnostics import TEST_FUNCTIONS

DEFAULTS: dict[str, str] = {
    "n_particles": "256",
    "field_strength": "1.0",
    "t_final": "1.0",
    "sample_times": "",
    "initial_distribution": "gaussian:0:1",
    "project_to_sphere": "auto",
    "replicas": "1",
    "master_seed": "0",
    "quenched_init": "empirical",
    "process": "quenched",
    "snapshots": "false",
    "sweep_n": "32,128,512,2048",
    "phi": "v",
    "psi": "v",
    "symmetrize": "true",
    "u_hat": "1.0",
}


@dataclass(frozen=True)
class RunSettings:
    sim: SimConfig
    process: str
    snapshots: bool
    sweep_n: tuple[int, ...]
    phi: str
    psi: str
    symmetrize: bool
    u_hat: float
    raw: tuple[tuple[str, str], ...]

    def with_n(self, n: int) -> "RunSettings":
        return replace(self, sim=replace(self.sim, n_particles=n))

    def echo(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.raw)


def parse_lines(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown key")
        out[key] = value
    return out


def _bool(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ConfigError(key, f"expected true/false, got {value!r}")


def _number(key: str, value: str, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(key, f"cannot parse {value!r}") from None


def _int_list(key: str, value: str) -> tuple[int, ...]:
    return tuple(_number(key, x.strip(), int) for x in value.split(",") if x.strip())


def build(values: dict[str, str]) -> RunSettings:
    merged = {**DEFAULTS, **values}
    t_final = _number("t_final", merged["t_final"])
    if merged["sample_times"]:
        times = tuple(_number("sample_times", x.strip()) for x in merged["sample_times"].split(","))
    else:
        times = tuple(float(x) for x in np.linspace(0.0, t_final, 11))
    proj = merged["project_to_sphere"].lower()
    project = None if proj == "auto" else _bool("project_to_sphere", proj)
    sim = SimConfig(
        n_particles=_number("n_particles", merged["n_particles"], int),
        field_strength=_number("field_strength", merged["field_strength"]),
        t_final=t_final,
        sample_times=times,
        initial_distribution=InitialDistribution.parse(merged["initial_distribution"]),
        project_to_sphere=project,
        replicas=_number("replicas", merged["replicas"], int),
        master_seed=_number("master_seed", merged["master_seed"], int),
        quenched_init=merged["quenched_init"],
    )
    process = merged["process"]
    if process not in ("interacting", "quenched"):
        raise ConfigError("process", "must be interacting or quenched")
    for key in ("phi", "psi"):
        if merged[key] not in TEST_FUNCTIONS:
            raise ConfigError(key, f"unknown test function; choose from {sorted(TEST_FUNCTIONS)}")
    sweep = _int_list("sweep_n", merged["sweep_n"])
    if any(b <= a for a, b in zip(sweep, sweep[1:])) or any(n < 2 for n in sweep):
        raise ConfigError("sweep_n", "must be strictly increasing integers >= 2")
    return RunSettings(
        sim=sim,
        process=process,
        snapshots=_bool("snapshots", merged["snapshots"]),
        sweep_n=sweep,
        phi=merged["phi"],
        psi=merged["psi"],
        symmetrize=_bool("symmetrize", merged["symmetrize"]),
        u_hat=_number("u_hat", merged["u_hat"]),
        raw=tuple(sorted(merged.items())),
    )


def load(path=None, overrides: dict[str, str] | None = None) -> RunSettings:
    values: dict[str, str] = {}
    if path is not None:
        with open(path) as fh:
            values = parse_lines(fh.read(), str(path))
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown key")
        values[key] = value
    return build(values)
