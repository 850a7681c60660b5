"""Run configured experiments and write one CSV per experiment."""
from __future__ import annotations

import csv
import io
import logging
import math
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import sequences as seqs
from .config import (
    Experiment,
    ExperimentConfig,
    build_amalgam,
    build_constants,
    build_index_sequence,
    build_operator,
    build_product_word,
    build_sequence,
)
from .errors import DiagnosticError
from .free_group import decay_experiment, parse_word
from .free_product import AmalgamState, CenteredLetter, ProductWord, product_decay_experiment
from .markov import (
    classify,
    depolarizing,
    identity_map,
    require_markov,
    swm_defect,
    transpose_map,
    unitary_conjugation,
    validate,
)
from .matrix_core import matrix_unit, vector_state

log = logging.getLogger(__name__)

CLASSIFY_COLUMNS = ["name", "ue", "swm", "peripheral_eigs", "max_defect_at_n"]
FREE_GROUP_COLUMNS = ["word", "n", "lower_exact_num", "lower_exact_den", "lower_float", "upper_float",
                      "constants_mode"]
FREE_PRODUCT_COLUMNS = FREE_GROUP_COLUMNS + ["p"]
ZSIDO_COLUMNS = ["sequence_name", "n", "wmz_value", "certificate", "subsequence_name", "sub_norm"]
GALLERY_COLUMNS = ["case", "expected", "observed", "passed"]


def fmt(x) -> str:
    """Fixed 17-significant-digit formatting so identical runs give identical bytes."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, complex):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def to_csv(columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _check_bounds(rows: list[list], lo: int, hi: int, what: str):
    for r in rows:
        if r[lo] > r[hi] + 1e-12:
            raise DiagnosticError(f"{what}: lower {r[lo]!r} exceeds upper {r[hi]!r}")


# experiment kinds -----------------------------------------------------------

def run_classify(p: dict) -> tuple[list[str], list[list]]:
    n_probe = int(p.get("n_probe", 2000))
    tol = float(p.get("tol", 1e-9))
    seed = int(p.get("seed", 0))
    rows = []
    for i, spec in enumerate(p["operators"]):
        op = build_operator(spec, f"operator {i}")
        rep = classify(op, tol=tol, n_probe=n_probe, seed=seed)
        eigs = ";".join(fmt(z) for z in rep.peripheral_eigenvalues)
        rows.append([op.name or f"operator_{i}", rep.uniquely_ergodic, rep.strictly_weak_mixing, eigs,
                     rep.max_defect])
    return CLASSIFY_COLUMNS, rows


def run_free_group(p: dict) -> tuple[list[str], list[list]]:
    constants = build_constants(p.get("constants"), "constants")
    rows = []
    for w in p["words"]:
        for r in decay_experiment(parse_word(str(w)), p["n_values"], constants):
            rows.append([r.label, r.n, r.lower_exact.numerator, r.lower_exact.denominator,
                         r.lower_float, r.upper_float, r.constants_mode])
    _check_bounds(rows, 4, 5, "free-group decay")
    return FREE_GROUP_COLUMNS, rows


def run_free_product(p: dict) -> tuple[list[str], list[list]]:
    st = build_amalgam(p, "state")
    rows = []
    for i, spec in enumerate(p["words"]):
        w = build_product_word(spec, st, f"word {i}", bool(p.get("center", False)))
        label = spec.get("label")
        for r in product_decay_experiment(w, p["n_values"], st, label):
            rows.append([r.label, r.n, r.lower_exact.numerator, r.lower_exact.denominator,
                         r.lower_float, r.upper_float, r.constants_mode, r.p])
    _check_bounds(rows, 4, 5, "free-product decay")
    return FREE_PRODUCT_COLUMNS, rows


def run_zsido(p: dict) -> tuple[list[str], list[list]]:
    mode = p.get("mode", "auto")
    seed = p.get("seed")
    trials = int(p.get("trials", 32))
    horizon = int(p.get("horizon", 10_000))
    subs = [build_index_sequence(str(s), horizon, "subsequences")
            for s in p.get("subsequences", ["evens", "integers"])]
    for idx in subs:
        flag, gap = seqs.relatively_dense(idx, horizon)
        log.info("%s: lower density %.6f, relatively dense %s (max gap %d) at horizon %d",
                 idx.name, seqs.lower_density(idx, horizon), flag, gap, horizon)
    rows = []
    for i, spec in enumerate(p["sequences"]):
        seq = build_sequence(spec, f"sequence {i}")
        for n in p["n_values"]:
            m = mode if mode != "auto" else ("exact" if n <= seqs.EXACT_MAX_N else "sampled")
            val = seqs.wmz_quantity(seq, n, m, trials=trials, seed=None if seed is None else int(seed))
            for idx in subs:
                rows.append([seq.name, n, val.value, val.certificate, idx.name,
                             seqs.subsequence_cesaro_norm(seq, idx, n)])
    return ZSIDO_COLUMNS, rows


def gallery_rows() -> list[list]:
    """The canonical example set with its expected outcomes."""
    rows = []

    def add(case: str, expected: str, observed: str):
        rows.append([case, expected, observed, expected == observed])

    rep = classify(depolarizing(0.3))
    add("depolarizing(0.3)", "ue=true swm=true",
        f"ue={fmt(rep.uniquely_ergodic)} swm={fmt(rep.strictly_weak_mixing)}")

    rot = unitary_conjugation(np.diag([1, np.exp(1j)]))
    rep = classify(rot)
    defect = swm_defect(rot, matrix_unit((2,), 0, 0, 1), vector_state([1, 1]), 10_000, rep.projection)
    add("unitary_conjugation(diag(1,e^i))", "ue=true swm=false defect=0.5",
        f"ue={fmt(rep.uniquely_ergodic)} swm={fmt(rep.strictly_weak_mixing)} "
        f"defect={'0.5' if abs(defect - 0.5) <= 1e-9 else fmt(defect)}")

    rep = classify(identity_map())
    add("identity", "ue=true swm=true max_defect=0",
        f"ue={fmt(rep.uniquely_ergodic)} swm={fmt(rep.strictly_weak_mixing)} "
        f"max_defect={'0' if rep.max_defect == 0 else fmt(rep.max_defect)}")

    v = validate(transpose_map())
    add("transpose", "rejected min_choi=-1",
        f"{'accepted' if v.passed else 'rejected'} "
        f"min_choi={'-1' if abs(v.min_choi_eigenvalue + 1) <= 1e-10 else fmt(v.min_choi_eigenvalue)}")

    ns = [1, 4, 16]
    recs = decay_experiment(parse_word("g0"), ns)
    ok = all(r.lower_exact == Fraction(1, n) and abs(r.upper_float - 2 / math.sqrt(n)) <= 1e-12
             for r, n in zip(recs, ns))
    add("free_group g0 n=1,4,16", "lower=1,1/2,1/4 upper=2,1,1/2",
        "lower=1,1/2,1/4 upper=2,1,1/2" if ok else
        "lower=" + ",".join(fmt(r.lower_float) for r in recs) + " upper=" + ",".join(fmt(r.upper_float) for r in recs))

    st = AmalgamState.trace(2)
    w = ProductWord((CenteredLetter(0, np.array([[0, 1], [1, 0]])),))
    recs = product_decay_experiment(w, ns, st)
    ok = all(abs(r.lower_float - 1 / math.sqrt(n)) <= 1e-12 and abs(r.upper_float - 3 / math.sqrt(n)) <= 1e-12
             for r, n in zip(recs, ns))
    add("free_product sigma_x@0 n=1,4,16", "lower=1,1/2,1/4 upper=3,3/2,3/4",
        "lower=1,1/2,1/4 upper=3,3/2,3/4" if ok else
        "lower=" + ",".join(fmt(r.lower_float) for r in recs) + " upper=" + ",".join(fmt(r.upper_float) for r in recs))
    return rows


def run_gallery(p: dict) -> tuple[list[str], list[list]]:
    return GALLERY_COLUMNS, gallery_rows()


RUNNERS: dict[str, Callable[[dict], tuple[list[str], list[list]]]] = {
    "classify": run_classify,
    "decay-free-group": run_free_group,
    "decay-free-product": run_free_product,
    "zsido": run_zsido,
    "gallery": run_gallery,
}


def run_experiment(exp: Experiment) -> str:
    columns, rows = RUNNERS[exp.kind](exp.params)
    if exp.kind == "gallery":
        failed = [r[0] for r in rows if not r[3]]
        if failed:
            raise GalleryMismatch(to_csv(columns, rows), failed)
    return to_csv(columns, rows)


class GalleryMismatch(DiagnosticError):
    def __init__(self, csv_text: str, failed: list[str]):
        super().__init__(f"gallery cases did not match expectations: {', '.join(failed)}")
        self.csv_text = csv_text


def validate_operators(cfg: ExperimentConfig):
    """Raise ValidationError for the first non-Markov operator in a classify experiment."""
    for exp in cfg.experiments:
        if exp.kind == "classify":
            for i, spec in enumerate(exp.params["operators"]):
                require_markov(build_operator(spec, f"operator {i}"), float(exp.params.get("tol", 1e-9)))


def run(cfg: ExperimentConfig, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for exp in cfg.experiments:
        path = out_dir / exp.output
        try:
            text = run_experiment(exp)
        except GalleryMismatch as exc:
            path.write_text(exc.csv_text)
            raise
        path.write_text(text)
        log.info("%s -> %s", exp.name, path)
        written.append(path)
    return written
