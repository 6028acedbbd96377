"""Run configuration: flat ``key = value`` documents with dotted section names.

Example::

    # two degenerate oscillators, separable coupling
    system.k1 = 1
    system.k2 = 1
    system.k3 = 1
    initial.alpha = 2.3562
    numerics.t_max = 20

Bare keys (``k1``, ``alpha``) are accepted when they name exactly one known
key. Unknown keys are errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bath import BathSpec, SystemParams

MODES = ("simulate", "analytic", "kernel", "dfs-check", "sweep")
SWEEP_PARAMS = ("omega1", "omega2", "k1", "k2", "k3", "nbar", "delta_k", "delta_omega", "alpha", "phi")
AXIS_FIELDS = ("name", "min", "max", "count", "scale")
MAX_AXES = 3


class ConfigError(ValueError):
    pass


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _modes(text: str) -> tuple:
    """``omega:c; omega:c`` with complex c written as Python literals (0.1, 0.1+0.2j)."""
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        w, c = item.split(":")
        out.append((float(w), complex(c.replace(" ", ""))))
    if not out:
        raise ValueError("empty mode list")
    return tuple(out)


def _amplitudes(text: str) -> tuple:
    """``n1,n2:amp; n1,n2:amp``."""
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        occ, amp = item.split(":")
        out.append((tuple(int(n) for n in occ.split(",")), complex(amp.replace(" ", ""))))
    if not out:
        raise ValueError("empty amplitude list")
    return tuple(out)


# key -> (parser, default, help)
SCHEMA = {
    "mode": (_choice(*MODES), None, "run mode; normally given by the subcommand"),
    "system.omega1": (_float, 1.0, "frequency of oscillator 1"),
    "system.omega2": (_float, 1.0, "frequency of oscillator 2"),
    "system.k1": (_float, 1.0, "decay constant of oscillator 1"),
    "system.k2": (_float, 1.0, "decay constant of oscillator 2"),
    "system.k3": (_float, None, "cross decay constant (default sqrt(k1 k2), separable)"),
    "system.delta_k": (_float, None, "alternative to k3: k3 = sqrt(k1 k2) - delta_k"),
    "system.nbar": (_float, 0.0, "bath thermal occupation (simulate with numerics.generator = markov)"),
    "bath.variant": (_choice("flat", "lorentzian", "discrete"), "flat", "bath model for kernel mode"),
    "bath.kappa": (_float, None, "flat bath amplitude rate (default k1 + k2)"),
    "bath.gamma": (_float, 1.0, "lorentzian strength (resonant amplitude rate gamma/2)"),
    "bath.center": (_float, None, "lorentzian centre (default: system frequency)"),
    "bath.width": (_float, 1.0, "lorentzian half-width"),
    "bath.modes": (_modes, None, "discrete modes 'omega:c; omega:c'"),
    "bath.beta": (_float, math.inf, "inverse temperature (inf for T = 0)"),
    "bath.convention": (_choice("physical", "conjugate"), "physical", "kernel exponent sign"),
    "initial.alpha": (_float, None, "initial state cos(alpha)|1,0> + sin(alpha) e^{i phi}|0,1>"),
    "initial.phi": (_float, 0.0, "relative phase of the initial state"),
    "initial.preset": (_choice("sd", "wd"), None, "strong or weak decoherence initial state"),
    "initial.amplitudes": (_amplitudes, None, "explicit amplitudes 'n1,n2:amp; ...'"),
    "numerics.cutoff": (_int, 3, "Fock cutoff per mode"),
    "numerics.t_max": (_float, None, "final time (default 10/(k1+k2))"),
    "numerics.dt": (_float, None, "time step (default min(0.01/rate scale, 0.01 t_max))"),
    "numerics.store_every": (_int, 1, "keep every n-th RK4 step"),
    "numerics.generator": (_choice("general", "markov"), "general", "simulate: cross-damping or collective-mode generator"),
    "numerics.engine": (_choice("rk4", "analytic"), "rk4", "sweep: how P(t) is produced"),
    "sweep.jobs": (_int, 1, "worker processes for sweeps"),
    "output.prefix": (str, "oscdfs", "output path prefix"),
}
for _i in range(1, MAX_AXES + 1):
    _p = "sweep.axis" if _i == 1 else f"sweep.axis{_i}"
    SCHEMA[f"{_p}.name"] = (_choice(*SWEEP_PARAMS), None, f"sweep axis {_i} parameter")
    SCHEMA[f"{_p}.min"] = (_float, None, f"sweep axis {_i} lower end")
    SCHEMA[f"{_p}.max"] = (_float, None, f"sweep axis {_i} upper end")
    SCHEMA[f"{_p}.count"] = (_int, None, f"sweep axis {_i} number of points (>= 2)")
    SCHEMA[f"{_p}.scale"] = (_choice("linear", "log"), "linear", f"sweep axis {_i} spacing")


def _aliases() -> dict:
    by_leaf: dict = {}
    for key in SCHEMA:
        by_leaf.setdefault(key.rsplit(".", 1)[-1], []).append(key)
    return {leaf: keys[0] for leaf, keys in by_leaf.items() if len(keys) == 1}


ALIASES = _aliases()


@dataclass(frozen=True)
class SweepAxis:
    name: str
    lo: float
    hi: float
    count: int
    scale: str = "linear"

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class RunConfig:
    mode: Optional[str]
    system: SystemParams
    bath: BathSpec
    convention: str
    initial: tuple  # ("angles", alpha, phi) | ("preset", name) | ("amplitudes", tuple)
    cutoff: int
    t_max: Optional[float]
    dt: Optional[float]
    store_every: int
    generator: str
    engine: str
    axes: tuple = ()
    jobs: int = 1
    prefix: str = "oscdfs"
    resolved: dict = field(default_factory=dict, compare=False)

    def header(self) -> str:
        items = "; ".join(f"{k}={_show(v)}" for k, v in sorted(self.resolved.items()))
        return (
            f"oscdfs {self.mode} | hbar=1, frequencies and rates in reciprocal time units\n"
            f"config: {items}"
        )

    def with_mode(self, mode: str) -> "RunConfig":
        if self.mode is not None and self.mode != mode:
            raise ConfigError(f"config declares mode={self.mode} but command is {mode}")
        resolved = dict(self.resolved, mode=mode)
        return _replace(self, mode=mode, resolved=resolved)

    def override(self, **values) -> "RunConfig":
        """Apply command-line overrides (``cutoff``, ``t_max``, ``dt``, ``prefix``)."""
        keymap = {"cutoff": "numerics.cutoff", "t_max": "numerics.t_max", "dt": "numerics.dt",
                  "prefix": "output.prefix"}
        changes = {k: v for k, v in values.items() if v is not None}
        resolved = dict(self.resolved)
        for k, v in changes.items():
            resolved[keymap[k]] = v
        if changes.get("cutoff") is not None and changes["cutoff"] < 1:
            raise ConfigError("numerics.cutoff must be >= 1")
        if changes.get("dt") is not None and changes["dt"] <= 0:
            raise ConfigError("numerics.dt must be positive")
        return _replace(self, resolved=resolved, **changes)


def _replace(cfg, **changes):
    from dataclasses import replace
    return replace(cfg, **changes)


def _show(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, tuple):
        return repr(v).replace(" ", "")
    return str(v)


def read_document(text: str) -> dict:
    """Parse ``key = value`` lines into {canonical key: (value, line number)}."""
    entries: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        canon = key if key in SCHEMA else ALIASES.get(key)
        if canon is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if canon in entries:
            raise ConfigError(f"line {lineno}: duplicate key {canon!r} (first on line {entries[canon][1]})")
        parser = SCHEMA[canon][0]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {canon}: cannot parse {value!r}: {exc}") from None
        entries[canon] = (parsed, lineno)
    return entries


def parse_config(text: str) -> RunConfig:
    entries = read_document(text)

    def get(key):
        return entries[key][0] if key in entries else SCHEMA[key][1]

    def where(*keys):
        lines = [f"line {entries[k][1]}" for k in keys if k in entries]
        return (", ".join(lines) + ": ") if lines else ""

    k1, k2 = get("system.k1"), get("system.k2")
    if "system.k3" in entries and "system.delta_k" in entries:
        raise ConfigError(f"{where('system.k3', 'system.delta_k')}give system.k3 or system.delta_k, not both")
    if "system.delta_k" in entries:
        k3 = math.sqrt(max(k1 * k2, 0.0)) - get("system.delta_k")
    elif "system.k3" in entries:
        k3 = get("system.k3")
    else:
        k3 = math.sqrt(max(k1 * k2, 0.0))
    try:
        system = SystemParams(
            omega1=get("system.omega1"), omega2=get("system.omega2"),
            k1=k1, k2=k2, k3=k3, nbar=get("system.nbar"),
        )
    except ValueError as exc:
        ctx = where("system.k1", "system.k2", "system.k3", "system.delta_k", "system.nbar")
        raise ConfigError(f"{ctx}invalid system parameters: {exc}") from None

    variant = get("bath.variant")
    try:
        if variant == "flat":
            kappa = get("bath.kappa")
            bath = BathSpec.flat(system.ktot if kappa is None else kappa, beta=get("bath.beta"))
        elif variant == "lorentzian":
            center = get("bath.center")
            bath = BathSpec.lorentzian(
                get("bath.gamma"), system.omega_mean if center is None else center,
                get("bath.width"), beta=get("bath.beta"),
            )
        else:
            modes = get("bath.modes")
            if modes is None:
                raise ValueError("discrete bath needs bath.modes")
            bath = BathSpec.discrete(modes, beta=get("bath.beta"))
    except ValueError as exc:
        raise ConfigError(f"{where(*[k for k in entries if k.startswith('bath.')])}invalid bath: {exc}") from None

    forms = [k for k in ("initial.alpha", "initial.preset", "initial.amplitudes") if k in entries]
    if len(forms) > 1:
        raise ConfigError(f"{where(*forms)}exactly one initial-state form allowed, got {', '.join(forms)}")
    if "initial.phi" in entries and forms and forms[0] != "initial.alpha":
        raise ConfigError(f"{where('initial.phi')}initial.phi only applies with initial.alpha")
    if not forms or forms[0] == "initial.alpha":
        alpha = get("initial.alpha")
        initial = ("angles", 0.0 if alpha is None else alpha, get("initial.phi"))
    elif forms[0] == "initial.preset":
        initial = ("preset", get("initial.preset"))
    else:
        initial = ("amplitudes", get("initial.amplitudes"))

    cutoff = get("numerics.cutoff")
    if cutoff < 1:
        raise ConfigError(f"{where('numerics.cutoff')}numerics.cutoff must be >= 1")
    for key in ("numerics.t_max", "numerics.dt"):
        val = get(key)
        if val is not None and not val > 0:
            raise ConfigError(f"{where(key)}{key} must be positive")
    if get("numerics.store_every") < 1:
        raise ConfigError(f"{where('numerics.store_every')}numerics.store_every must be >= 1")

    axes = []
    for i in range(1, MAX_AXES + 1):
        p = "sweep.axis" if i == 1 else f"sweep.axis{i}"
        present = [f"{p}.{f}" for f in AXIS_FIELDS if f"{p}.{f}" in entries]
        if not present:
            continue
        missing = [f"{p}.{f}" for f in ("name", "min", "max", "count") if f"{p}.{f}" not in entries]
        if missing:
            raise ConfigError(f"{where(*present)}sweep axis incomplete, missing {', '.join(missing)}")
        axis = SweepAxis(get(f"{p}.name"), get(f"{p}.min"), get(f"{p}.max"),
                         get(f"{p}.count"), get(f"{p}.scale"))
        if axis.count < 2:
            raise ConfigError(f"{where(p + '.count')}sweep axis count must be >= 2")
        if axis.scale == "log" and not (axis.lo > 0 and axis.hi > 0):
            raise ConfigError(f"{where(p + '.min', p + '.max')}log axis needs positive bounds")
        if axis.name in (a.name for a in axes):
            raise ConfigError(f"{where(p + '.name')}sweep parameter {axis.name} used twice")
        axes.append(axis)

    resolved = {
        k: get(k) for k in SCHEMA
        if get(k) is not None and (not k.startswith("sweep.axis") or k.rsplit(".", 1)[0] + ".name" in entries)
    }
    resolved["system.k3"] = k3
    return RunConfig(
        mode=get("mode"),
        system=system,
        bath=bath,
        convention=get("bath.convention"),
        initial=initial,
        cutoff=cutoff,
        t_max=get("numerics.t_max"),
        dt=get("numerics.dt"),
        store_every=get("numerics.store_every"),
        generator=get("numerics.generator"),
        engine=get("numerics.engine"),
        axes=tuple(axes),
        jobs=get("sweep.jobs"),
        prefix=get("output.prefix"),
        resolved=resolved,
    )


def expand_axes(system: SystemParams, initial: tuple, axes) -> list:
    """Cartesian grid of (axis values, SystemParams, initial form) in row-major axis order."""
    import itertools
    from dataclasses import replace

    grids = [axis.values() for axis in axes]
    points = []
    for combo in itertools.product(*grids):
        vals = dict(zip((a.name for a in axes), combo))
        fields = dict(omega1=system.omega1, omega2=system.omega2, k1=system.k1,
                      k2=system.k2, k3=system.k3, nbar=system.nbar)
        keep_dk = system.delta_k
        for name in ("omega1", "omega2", "k1", "k2", "nbar"):
            if name in vals:
                fields[name] = float(vals[name])
        if "k3" in vals:
            fields["k3"] = float(vals["k3"])
        elif any(n in vals for n in ("k1", "k2")) or "delta_k" in vals:
            dk = float(vals.get("delta_k", keep_dk))
            fields["k3"] = math.sqrt(fields["k1"] * fields["k2"]) - dk
        if "delta_omega" in vals:
            mean = 0.5 * (fields["omega1"] + fields["omega2"])
            fields["omega1"] = mean - float(vals["delta_omega"])
            fields["omega2"] = mean + float(vals["delta_omega"])
        params = replace(system, **fields)
        init = initial
        if "alpha" in vals or "phi" in vals:
            if initial[0] != "angles":
                raise ConfigError("alpha/phi sweep needs an initial.alpha initial state")
            init = ("angles", float(vals.get("alpha", initial[1])), float(vals.get("phi", initial[2])))
        points.append((tuple(float(v) for v in combo), params, init))
    return points
