"""Strict JSON run configuration with line-anchored error messages.

Every object in the document remembers where it sits in the source text, so
an unknown key, a missing field or an out-of-range value can be reported as
``path:line: message``. Unknown keys are always an error.
"""
from __future__ import annotations

import json
import json.decoder
import json.scanner
import re
from dataclasses import dataclass

import numpy as np

from .core import Free, PhysicalParams, PowerLaw, Tabulated, make_grid


class ConfigError(ValueError):
    def __init__(self, message, line=None, source="<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class _Node(dict):
    """A JSON object that knows its span in the source text."""

    start = 0
    end = 0
    text = ""
    children = ()

    def line(self, key=None, occurrence=0):
        if key is None:
            return _line_of(self.text, self.start)
        pattern = re.compile(r'(?<!\\)"' + re.escape(json.dumps(key)[1:-1]) + r'"\s*:')
        seen = 0
        for match in pattern.finditer(self.text, self.start, self.end):
            if not any(c.start <= match.start() < c.end for c in self.children):
                if seen == occurrence:
                    return _line_of(self.text, match.start())
                seen += 1
        return self.line()


def _line_of(text, pos):
    return text.count("\n", 0, pos) + 1


def _nested_nodes(value):
    if isinstance(value, _Node):
        yield value
    elif isinstance(value, list):
        for item in value:
            yield from _nested_nodes(item)


def _locating_decoder(text, source):
    decoder = json.JSONDecoder(object_pairs_hook=list)

    def parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None):
        _, start = s_and_end
        pairs, end = json.decoder.JSONObject(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo)
        node = _Node()
        node.start, node.end, node.text = start - 1, end, text
        node.children = tuple(n for _, v in pairs for n in _nested_nodes(v))
        for key, value in pairs:
            if key in node:
                raise ConfigError(f"duplicate key {key!r}", node.line(key, occurrence=1), source)
            node[key] = value
        return node, end

    def reject_constant(name):
        raise ValueError(f"non-finite number {name} is not allowed")

    decoder.parse_object = parse_object
    decoder.parse_constant = reject_constant
    decoder.scan_once = json.scanner.py_make_scanner(decoder)
    return decoder


def parse_json(text, source="<config>"):
    decoder = _locating_decoder(text, source)
    try:
        value, end = decoder.raw_decode(text, re.match(r"\s*", text).end())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), None, source) from None
    trailing = text[end:].strip()
    if trailing:
        raise ConfigError("unexpected content after the JSON document", _line_of(text, end), source)
    if not isinstance(value, _Node):
        raise ConfigError("top level must be a JSON object", 1, source)
    return value


# Field kinds understood by ``_fields``.
NUMBER, INT, BOOL, STR, NUMBERS, INTS, OBJECT = "number", "integer", "boolean", "string", "number list", "integer list", "object"
_REQUIRED = object()


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


_CHECKS = {
    NUMBER: _is_number,
    INT: _is_int,
    BOOL: lambda v: isinstance(v, bool),
    STR: lambda v: isinstance(v, str),
    NUMBERS: lambda v: isinstance(v, list) and all(_is_number(x) for x in v),
    INTS: lambda v: isinstance(v, list) and all(_is_int(x) for x in v),
    OBJECT: lambda v: isinstance(v, _Node),
}


class _Reader:
    def __init__(self, source):
        self.source = source

    def error(self, message, node, key=None):
        return ConfigError(message, node.line(key) if node is not None else None, self.source)

    def fields(self, node, path, spec):
        """Validate ``node`` against ``{key: (kind, default)}``; reject extras."""
        if not isinstance(node, _Node):
            raise ConfigError(f"'{path}' must be an object", None, self.source)
        for key in node:
            if key not in spec:
                allowed = ", ".join(sorted(spec))
                raise self.error(f"unknown key '{path}.{key}' (allowed: {allowed})", node, key)
        out = {}
        for key, (kind, default) in spec.items():
            if key not in node:
                if default is _REQUIRED:
                    raise self.error(f"missing required field '{path}.{key}'", node)
                out[key] = default
                continue
            value = node[key]
            if not _CHECKS[kind](value):
                raise self.error(f"'{path}.{key}' must be a {kind}", node, key)
            if kind == NUMBER:
                value = float(value)
            elif kind == NUMBERS:
                value = [float(x) for x in value]
            out[key] = value
        return out

    def require(self, condition, message, node, key=None):
        if not condition:
            raise self.error(message, node, key)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; ``raw`` keeps the parsed document."""

    units: dict
    params: PhysicalParams
    grid: object
    potential: object
    initial_state: dict
    evolve: dict
    groundstate: dict
    spectrum: dict
    kernel: dict
    verify: dict
    output_dir: str
    seed: int
    source: str
    raw: dict

    def block(self, name):
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"missing required block '{name}' for this subcommand", self.raw.line(), self.source)
        return value


_TOP = {
    "units": (OBJECT, _REQUIRED),
    "physics": (OBJECT, _REQUIRED),
    "grid": (OBJECT, None),
    "potential": (OBJECT, None),
    "initial_state": (OBJECT, None),
    "evolve": (OBJECT, None),
    "groundstate": (OBJECT, None),
    "spectrum": (OBJECT, None),
    "kernel": (OBJECT, None),
    "verify": (OBJECT, None),
    "output_dir": (STR, None),
    "seed": (INT, 0),
}

_UNITS = {"system": (STR, _REQUIRED), "length": (STR, None), "time": (STR, None), "energy": (STR, None), "mass": (STR, None)}
_PHYSICS = {"alpha": (NUMBER, _REQUIRED), "d_alpha": (NUMBER, 0.5), "hbar": (NUMBER, 1.0)}
_GRID = {"dim": (INT, 1), "points": (INT, _REQUIRED), "extent": (NUMBER, _REQUIRED)}
_POTENTIAL = {"kind": (STR, _REQUIRED), "q2": (NUMBER, None), "beta": (NUMBER, None), "samples": (NUMBERS, None)}
_STATE = {
    "kind": (STR, "gaussian"),
    "center": (NUMBERS, None),
    "width": (NUMBER, 1.0),
    "momentum": (NUMBERS, None),
    "k": (INTS, None),
}
_EVOLVE = {"dt": (NUMBER, _REQUIRED), "steps": (INT, _REQUIRED), "snapshot_every": (INT, None)}
_GROUND = {"dt": (NUMBER, _REQUIRED), "tol": (NUMBER, 1e-6), "max_iters": (INT, 100000)}
_SPECTRUM = {"bohr": (OBJECT, None), "oscillator": (OBJECT, None)}
_BOHR = {"coupling": (NUMBER, _REQUIRED), "n_min": (INT, 1), "n_max": (INT, _REQUIRED)}
_OSC = {
    "q2": (NUMBER, _REQUIRED),
    "beta": (NUMBER, _REQUIRED),
    "n_min": (INT, 0),
    "n_max": (INT, _REQUIRED),
    "quadrature": (BOOL, False),
    "quad_tol": (NUMBER, 1e-10),
    "agreement_tol": (NUMBER, 1e-8),
}
_KERNEL = {
    "dim": (INT, 1),
    "separations": (NUMBERS, _REQUIRED),
    "durations": (NUMBERS, _REQUIRED),
    "damping": (NUMBER, 0.0),
    "tol": (NUMBER, 1e-12),
    "composition": (OBJECT, None),
    "residual": (OBJECT, None),
}
_COMPOSE = {
    "slices": (INTS, _REQUIRED),
    "separations": (NUMBERS, _REQUIRED),
    "duration": (NUMBER, 1.0),
    "damping": (NUMBER, 0.1),
    "points": (INT, 1024),
    "extent": (NUMBER, 40.0),
    "agreement_tol": (NUMBER, 1e-4),
}
_RESIDUAL = {"separations": (NUMBERS, _REQUIRED), "duration": (NUMBER, 1.0), "dt_probes": (NUMBERS, _REQUIRED)}
_VERIFY = {
    "points": (INT, 256),
    "extent": (NUMBER, 20.0),
    "random_states": (INT, 100),
    "alphas": (NUMBERS, [1.1, 1.5, 1.9, 2.0]),
    "parity_steps": (INT, 1000),
    "dt": (NUMBER, 0.01),
}


def verify_defaults():
    return {key: (list(default) if isinstance(default, list) else default) for key, (_, default) in _VERIFY.items()}


def _physics(reader, node):
    f = reader.fields(node, "physics", _PHYSICS)
    try:
        return PhysicalParams(f["alpha"], f["d_alpha"], f["hbar"])
    except ValueError as exc:
        key = "alpha" if "alpha" in str(exc) else "d_alpha" if "d_alpha" in str(exc) else "hbar"
        raise reader.error(str(exc), node, key) from None


def _grid(reader, node):
    f = reader.fields(node, "grid", _GRID)
    try:
        return make_grid(f["dim"], f["points"], f["extent"])
    except ValueError as exc:
        key = "dim" if "dim" in str(exc) else "points" if "points" in str(exc) else "extent"
        raise reader.error(str(exc), node, key) from None


def _potential(reader, node):
    f = reader.fields(node, "potential", _POTENTIAL)
    kind = f["kind"]
    if kind == "free":
        return Free()
    if kind == "power_law":
        for key in ("q2", "beta"):
            reader.require(f[key] is not None, f"missing required field 'potential.{key}' for a power_law potential", node)
        try:
            return PowerLaw(f["q2"], f["beta"])
        except ValueError as exc:
            raise reader.error(str(exc), node, "beta" if "beta" in str(exc) else "q2") from None
    if kind == "tabulated":
        reader.require(f["samples"] is not None, "missing required field 'potential.samples'", node)
        return Tabulated(tuple(f["samples"]))
    raise reader.error(f"unknown potential kind {kind!r} (free, power_law, tabulated)", node, "kind")


def _positive(reader, node, f, path, keys):
    for key in keys:
        if f[key] is not None:
            reader.require(f[key] > 0, f"'{path}.{key}' must be positive", node, key)


def _n_range(reader, node, f, path, lowest):
    reader.require(f["n_min"] >= lowest, f"'{path}.n_min' must be >= {lowest}", node, "n_min")
    reader.require(f["n_max"] >= f["n_min"], f"'{path}.n_max' must be >= n_min", node, "n_max")


def _nonempty(reader, node, f, path, key):
    reader.require(len(f[key]) > 0, f"'{path}.{key}' must not be empty", node, key)


def load_config(text, source="<config>"):
    doc = parse_json(text, source)
    r = _Reader(source)
    top = r.fields(doc, "config", _TOP)
    units = r.fields(top["units"], "units", _UNITS)
    params = _physics(r, top["physics"])
    grid = _grid(r, top["grid"]) if top["grid"] is not None else None
    potential = _potential(r, top["potential"]) if top["potential"] is not None else Free()
    if isinstance(potential, Tabulated) and grid is not None and len(potential.samples) != grid.size:
        raise r.error(
            f"tabulated potential has {len(potential.samples)} samples, grid has {grid.size} nodes",
            top["potential"], "samples",
        )

    state = r.fields(top["initial_state"] or _empty(doc), "initial_state", _STATE)
    if state["kind"] not in ("gaussian", "random", "plane_wave"):
        raise r.error(f"unknown initial_state kind {state['kind']!r} (gaussian, random, plane_wave)", top["initial_state"], "kind")
    if state["kind"] == "plane_wave":
        r.require(state["k"] is not None, "missing required field 'initial_state.k' for a plane wave", top["initial_state"])
    r.require(state["width"] > 0, "'initial_state.width' must be positive", top["initial_state"], "width")

    evolve = ground = spectrum = kernel = verify = None
    if top["evolve"] is not None:
        node = top["evolve"]
        evolve = r.fields(node, "evolve", _EVOLVE)
        _positive(r, node, evolve, "evolve", ("dt",))
        r.require(evolve["steps"] >= 0, "'evolve.steps' must be >= 0", node, "steps")
        if evolve["snapshot_every"] is None:
            evolve["snapshot_every"] = max(1, evolve["steps"])
        r.require(evolve["snapshot_every"] >= 1, "'evolve.snapshot_every' must be >= 1", node, "snapshot_every")
    if top["groundstate"] is not None:
        node = top["groundstate"]
        ground = r.fields(node, "groundstate", _GROUND)
        _positive(r, node, ground, "groundstate", ("dt", "tol", "max_iters"))
    if top["spectrum"] is not None:
        node = top["spectrum"]
        spectrum = r.fields(node, "spectrum", _SPECTRUM)
        r.require(spectrum["bohr"] is not None or spectrum["oscillator"] is not None,
                  "'spectrum' needs a 'bohr' or an 'oscillator' block", node)
        if spectrum["bohr"] is not None:
            sub = spectrum["bohr"]
            spectrum["bohr"] = r.fields(sub, "spectrum.bohr", _BOHR)
            _positive(r, sub, spectrum["bohr"], "spectrum.bohr", ("coupling",))
            _n_range(r, sub, spectrum["bohr"], "spectrum.bohr", 1)
        if spectrum["oscillator"] is not None:
            sub = spectrum["oscillator"]
            osc = r.fields(sub, "spectrum.oscillator", _OSC)
            _positive(r, sub, osc, "spectrum.oscillator", ("q2", "agreement_tol"))
            r.require(1.0 < osc["beta"] <= 2.0, "'spectrum.oscillator.beta' must satisfy 1 < beta <= 2", sub, "beta")
            r.require(0 < osc["quad_tol"] <= 1e-4, "'spectrum.oscillator.quad_tol' must lie in (0, 1e-4]", sub, "quad_tol")
            _n_range(r, sub, osc, "spectrum.oscillator", 0)
            spectrum["oscillator"] = osc
    if top["kernel"] is not None:
        node = top["kernel"]
        kernel = r.fields(node, "kernel", _KERNEL)
        r.require(kernel["dim"] in (1, 3), "'kernel.dim' must be 1 or 3", node, "dim")
        for key in ("separations", "durations"):
            _nonempty(r, node, kernel, "kernel", key)
        r.require(all(s >= 0 for s in kernel["separations"]), "'kernel.separations' must be >= 0", node, "separations")
        r.require(all(t > 0 for t in kernel["durations"]), "'kernel.durations' must be positive", node, "durations")
        r.require(0 <= kernel["damping"] <= 1, "'kernel.damping' must lie in [0, 1]", node, "damping")
        r.require(0 < kernel["tol"] < 1e-3, "'kernel.tol' must lie in (0, 1e-3)", node, "tol")
        if kernel["composition"] is not None:
            sub = kernel["composition"]
            comp = r.fields(sub, "kernel.composition", _COMPOSE)
            _nonempty(r, sub, comp, "kernel.composition", "slices")
            _nonempty(r, sub, comp, "kernel.composition", "separations")
            r.require(all(s >= 2 for s in comp["slices"]), "'kernel.composition.slices' entries must be >= 2", sub, "slices")
            r.require(0 <= comp["damping"] <= 1, "'kernel.composition.damping' must lie in [0, 1]", sub, "damping")
            _positive(r, sub, comp, "kernel.composition", ("duration", "extent", "agreement_tol"))
            try:
                comp["grid"] = make_grid(1, comp["points"], comp["extent"])
            except ValueError as exc:
                raise r.error(str(exc), sub, "points") from None
            kernel["composition"] = comp
        if kernel["residual"] is not None:
            sub = kernel["residual"]
            res = r.fields(sub, "kernel.residual", _RESIDUAL)
            _nonempty(r, sub, res, "kernel.residual", "separations")
            _nonempty(r, sub, res, "kernel.residual", "dt_probes")
            _positive(r, sub, res, "kernel.residual", ("duration",))
            r.require(all(0 < d < res["duration"] for d in res["dt_probes"]),
                      "'kernel.residual.dt_probes' must lie in (0, duration)", sub, "dt_probes")
            kernel["residual"] = res
    if top["verify"] is not None:
        node = top["verify"]
        verify = r.fields(node, "verify", _VERIFY)
        _positive(r, node, verify, "verify", ("extent", "random_states", "parity_steps", "dt"))
        r.require(all(1.0 < a <= 2.0 for a in verify["alphas"]), "'verify.alphas' must satisfy 1 < alpha <= 2", node, "alphas")
        try:
            make_grid(1, verify["points"], verify["extent"])
        except ValueError as exc:
            raise r.error(str(exc), node, "points") from None

    seed = top["seed"]
    r.require(0 <= seed < 2**64, "'seed' must be an unsigned 64-bit integer", doc, "seed")
    return RunConfig(
        units={k: v for k, v in units.items() if v is not None}, params=params, grid=grid, potential=potential, initial_state=state,
        evolve=evolve, groundstate=ground, spectrum=spectrum, kernel=kernel, verify=verify,
        output_dir=top["output_dir"], seed=seed, source=source, raw=doc,
    )


def _empty(parent):
    node = _Node()
    node.start, node.end, node.text = parent.start, parent.start, parent.text
    return node


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return load_config(text, str(path))


def to_plain(value):
    """Strip source-location wrappers for re-serialization."""
    if isinstance(value, dict):
        return {k: to_plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [to_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value
