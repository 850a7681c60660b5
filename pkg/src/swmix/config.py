"""YAML experiment configuration: parsing and validation.

A config holds a list of experiments under ``experiments``; each has a
``name``, a ``kind`` and kind-specific keys. See README.md for the schema.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import SwmixError
from .free_group import SHARP, FreeGroupSharp, RDConstants, parse_word
from .free_product import AmalgamState, CenteredLetter, ProductWord, center
from .markov import MarkovOperator, depolarizing, identity_map, random_markov, transpose_map, unitary_conjugation
from .matrix_core import AlgebraElement, parse_matrix
from . import sequences as seqs

KINDS = ("classify", "decay-free-group", "decay-free-product", "zsido", "gallery")


class ConfigError(SwmixError):
    """The configuration file is malformed or violates a schema rule."""


@dataclass
class Experiment:
    name: str
    kind: str
    output: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    experiments: list[Experiment]
    output_dir: str | None = None
    source: str | None = None


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return d[key]


def _n_grid(raw, where: str) -> list[int]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}: n_values must be a non-empty list")
    try:
        ns = [int(n) for n in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: n_values must be integers") from exc
    if any(n != r for n, r in zip(ns, raw)) or ns[0] < 1:
        raise ConfigError(f"{where}: n_values must be positive integers")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError(f"{where}: n_values must be strictly increasing")
    return ns


def _matrix(raw, where: str) -> np.ndarray:
    try:
        return parse_matrix(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _complex(raw, where: str) -> complex:
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        return complex(float(raw[0]), float(raw[1]))
    if isinstance(raw, (int, float)):
        return complex(raw)
    raise ConfigError(f"{where}: expected a number or [re, im]")


def _vector(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}: expected a non-empty list")
    return np.array([_complex(e, where) for e in raw])


def build_operator(spec: dict, where: str) -> MarkovOperator:
    """Operator from ``builtin``, ``kraus`` or ``superoperator`` keys."""
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: operator must be a mapping")
    name = str(spec.get("name", ""))
    try:
        if "builtin" in spec:
            b = spec["builtin"]
            if b == "depolarizing":
                op = depolarizing(float(_require(spec, "lam", where)), int(spec.get("d", 2)))
            elif b == "unitary_conjugation":
                if "unitary" in spec:
                    u = _matrix(spec["unitary"], where)
                else:
                    phases = [_complex(p, where).real for p in _require(spec, "phases", where)]
                    u = np.diag(np.exp(1j * np.array(phases)))
                if not np.allclose(u @ u.conj().T, np.eye(len(u)), atol=1e-12):
                    raise ConfigError(f"{where}: matrix is not unitary")
                op = unitary_conjugation(u)
            elif b == "identity":
                op = identity_map(tuple(spec.get("shape", [2])))
            elif b == "transpose":
                op = transpose_map(int(spec.get("d", 2)))
            elif b == "random":
                if "seed" not in spec:
                    raise ConfigError(f"{where}: random operators need a seed")
                rng = np.random.default_rng(int(spec["seed"]))
                op = random_markov(tuple(spec.get("shape", [2])), rng, int(spec.get("n_kraus", 2)))
            else:
                raise ConfigError(f"{where}: unknown builtin {b!r}")
        elif "kraus" in spec:
            ks = [_matrix(k, where) for k in spec["kraus"]]
            shape = tuple(spec["shape"]) if "shape" in spec else None
            op = MarkovOperator.from_kraus(ks, shape)
        elif "superoperator" in spec:
            op = MarkovOperator(_matrix(spec["superoperator"], where), tuple(_require(spec, "shape", where)))
        else:
            raise ConfigError(f"{where}: operator needs one of builtin, kraus, superoperator")
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return MarkovOperator(op.super, op.shape, op.kraus, name or op.name)


def build_constants(raw, where: str) -> RDConstants | FreeGroupSharp:
    if raw in (None, "sharp", "free_group_sharp"):
        return SHARP
    if isinstance(raw, dict):
        try:
            return RDConstants(float(_require(raw, "C", where)), float(_require(raw, "s", where)))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: constants must be 'sharp' or a mapping with C and s")


def build_amalgam(params: dict, where: str) -> AmalgamState:
    d = int(params.get("d", 2))
    if "state" not in params:
        return AmalgamState.trace(d)
    rho = _matrix(params["state"], where)
    if rho.shape != (d, d):
        raise ConfigError(f"{where}: state must be {d}x{d}")
    try:
        return AmalgamState.from_density(rho)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def build_product_word(spec: dict, st: AmalgamState, where: str, auto_center: bool) -> ProductWord:
    letters = []
    for i, pair in enumerate(_require(spec, "letters", where)):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{where}: letter {i} must be [index, matrix]")
        a = _matrix(pair[1], where)
        if a.shape != (st.d, st.d):
            raise ConfigError(f"{where}: letter {i} must be {st.d}x{st.d}")
        if auto_center:
            a = center(a, st)
        try:
            letters.append(CenteredLetter(int(pair[0]), a))
        except ValueError as exc:
            raise ConfigError(f"{where}: letter {i}: {exc}") from exc
    try:
        w = ProductWord(tuple(letters))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    if not all(l.is_centered(st) for l in w.letters):
        raise ConfigError(f"{where}: letters are not centered (set center: true)")
    return w


def build_sequence(spec: dict, where: str) -> seqs.VectorSequence:
    kind = _require(spec, "kind", where)
    if kind == "eigen":
        s = seqs.eigen_sequence(_complex(_require(spec, "z", where), where), _vector(_require(spec, "v", where), where))
    elif kind == "alternating":
        s = seqs.alternating(_vector(_require(spec, "v", where), where))
    elif kind == "sqrt_decay":
        s = seqs.sqrt_decay(_vector(_require(spec, "v", where), where))
    elif kind == "zero":
        s = seqs.zero_sequence(int(spec.get("dim", 2)))
    elif kind == "markov_orbit":
        op = build_operator(_require(spec, "operator", where), where)
        x = AlgebraElement.from_matrix(_matrix(_require(spec, "x", where), where))
        if x.shape != op.shape:
            raise ConfigError(f"{where}: x does not match the operator's algebra")
        s = seqs.markov_orbit(op, x)
    else:
        raise ConfigError(f"{where}: unknown sequence kind {kind!r}")
    return seqs.VectorSequence(str(spec.get("name", s.name)), s.term, s.norm_cap, s.norm)


def build_index_sequence(name: str, horizon: int, where: str) -> seqs.IndexSequence:
    if name == "evens":
        return seqs.IndexSequence.evens(horizon)
    if name == "integers":
        return seqs.IndexSequence.integers(horizon)
    if name == "squares":
        return seqs.IndexSequence.squares(horizon)
    if name.startswith("multiples_"):
        try:
            step = int(name.split("_", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"{where}: bad subsequence {name!r}") from exc
        return seqs.IndexSequence.multiples(step, horizon)
    raise ConfigError(f"{where}: unknown subsequence {name!r}")


def _check_experiment(exp: Experiment):
    """Build every object once so schema errors surface before any run."""
    p, where = exp.params, f"experiment {exp.name!r}"
    if exp.kind == "classify":
        ops = _require(p, "operators", where)
        if not isinstance(ops, list) or not ops:
            raise ConfigError(f"{where}: operators must be a non-empty list")
        for i, o in enumerate(ops):
            build_operator(o, f"{where} operator {i}")
        if int(p.get("n_probe", 2000)) < 1:
            raise ConfigError(f"{where}: n_probe must be positive")
    elif exp.kind == "decay-free-group":
        _n_grid(p.get("n_values"), where)
        words = _require(p, "words", where)
        for w in words:
            try:
                g = parse_word(str(w))
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from exc
            if len(g) == 0:
                raise ConfigError(f"{where}: the identity word does not decay")
        build_constants(p.get("constants"), where)
    elif exp.kind == "decay-free-product":
        _n_grid(p.get("n_values"), where)
        st = build_amalgam(p, where)
        for i, w in enumerate(_require(p, "words", where)):
            build_product_word(w, st, f"{where} word {i}", bool(p.get("center", False)))
    elif exp.kind == "zsido":
        ns = _n_grid(p.get("n_values"), where)
        mode = p.get("mode", "auto")
        if mode not in ("auto", "exact", "sampled"):
            raise ConfigError(f"{where}: mode must be auto, exact or sampled")
        if mode == "exact" and ns[-1] > seqs.EXACT_MAX_N:
            raise ConfigError(f"{where}: exact mode supports n <= {seqs.EXACT_MAX_N}")
        sampling = mode == "sampled" or (mode == "auto" and ns[-1] > seqs.EXACT_MAX_N)
        if sampling and "seed" not in p:
            raise ConfigError(f"{where}: a seed is required when sampling is used")
        horizon = int(p.get("horizon", 10_000))
        if horizon < 1:
            raise ConfigError(f"{where}: horizon must be positive")
        for i, s in enumerate(_require(p, "sequences", where)):
            build_sequence(s, f"{where} sequence {i}")
        for name in p.get("subsequences", ["evens", "integers"]):
            idx = build_index_sequence(str(name), horizon, where)
            if len(idx) < ns[-1]:
                raise ConfigError(f"{where}: subsequence {name!r} has only {len(idx)} indices below the horizon")


def parse_config(data: Any, source: str | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    raw = data.get("experiments")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("config needs a non-empty 'experiments' list")
    exps, names = [], set()
    for i, e in enumerate(raw):
        if not isinstance(e, dict):
            raise ConfigError(f"experiment {i} must be a mapping")
        kind = e.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"experiment {i}: kind must be one of {', '.join(KINDS)}")
        name = str(e.get("name", kind))
        if name in names:
            raise ConfigError(f"duplicate experiment name {name!r}")
        names.add(name)
        params = {k: v for k, v in e.items() if k not in ("name", "kind", "output")}
        exp = Experiment(name, kind, str(e.get("output", f"{name}.csv")), params)
        _check_experiment(exp)
        exps.append(exp)
    out = data.get("output_dir")
    return ExperimentConfig(exps, None if out is None else str(out), source)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return parse_config(data, str(path))
