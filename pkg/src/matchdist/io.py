"""Structured-text files for problems, outcomes and reports.

Every file is JSON carrying ``"schema": "matchdist/1"``.  Rationals are
written as ``"num/den"`` strings, tuples as lists, multisets as lists of
``[contract, side, multiplicity]`` records.  Label strings of the form
``"num/den"`` would read back as rationals and are rejected on write.
"""
from __future__ import annotations

import json
import os
import re
import tempfile
from fractions import Fraction
from numbers import Rational
from typing import Optional

from . import gallery
from .blocks import AuditReport, BlockCertificate, McReport
from .market import (
    AllFeasible,
    MatchedType,
    MatchingProblem,
    TableFeasibility,
    TabulatedUtility,
)
from .measure import DiscreteMeasure
from .multispace import (
    AtomSpace,
    CircleSpace,
    IntervalSpace,
    Multiset,
    ProductSpace,
    point_key,
    sided,
)
from .outcome import Outcome, ValidationReport

SCHEMA = "matchdist/1"
_RATIONAL = re.compile(r"^-?\d+/\d+$")


class ParseError(ValueError):
    def __init__(self, path: str, line: Optional[int], field: str, message: str):
        self.path, self.line, self.field = path, line, field
        where = f"{path}:{line}" if line else path
        super().__init__(f"{where}: field '{field}': {message}")


# ---------------------------------------------------------------------------
# values

def rational(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def encode_point(p):
    if p is None:
        return None
    if isinstance(p, bool):
        raise TypeError("booleans are not valid points")
    if isinstance(p, Rational):
        return rational(p)
    if isinstance(p, float):
        return rational(Fraction(str(p)))
    if isinstance(p, tuple):
        return [encode_point(q) for q in p]
    if isinstance(p, str):
        if _RATIONAL.match(p):
            raise ValueError(f"label {p!r} would read back as a rational")
        return p
    raise TypeError(f"cannot serialize point {p!r}")


def decode_point(v):
    if v is None:
        return None
    if isinstance(v, list):
        return tuple(decode_point(q) for q in v)
    if isinstance(v, str):
        return Fraction(v) if _RATIONAL.match(v) else v
    if isinstance(v, int) and not isinstance(v, bool):
        return Fraction(v)
    raise TypeError(f"not a point: {v!r}")


def decode_rational(v) -> Fraction:
    if isinstance(v, str) and _RATIONAL.match(v):
        return Fraction(v)
    if isinstance(v, int) and not isinstance(v, bool):
        return Fraction(v)
    raise TypeError(f"expected a 'num/den' rational, got {v!r}")


def encode_multiset(m: Multiset) -> list:
    return [[encode_point(x.contract), x.side, c] for x, c in m.items]


def decode_multiset(v) -> Multiset:
    if not isinstance(v, list):
        raise TypeError("multiset must be a list of [contract, side, multiplicity]")
    counts = {}
    for rec in v:
        if not (isinstance(rec, list) and len(rec) == 3):
            raise TypeError(f"bad multiset record {rec!r}")
        y, side, mult = rec
        if not isinstance(mult, int) or mult < 1:
            raise TypeError(f"multiplicity must be a positive integer, got {mult!r}")
        x = sided(decode_point(y), side)
        counts[x] = counts.get(x, 0) + mult
    return Multiset(counts)


def encode_value(v):
    """Utility values and margins: exact when rational, repr otherwise."""
    if isinstance(v, Rational):
        return rational(v)
    return repr(float(v))


def _space_name(space):
    if isinstance(space, ProductSpace):
        return [_space_name(f) for f in space.factors]
    return space.kind


def _space_from(v):
    if isinstance(v, list):
        return ProductSpace(tuple(_space_from(f) for f in v))
    spaces = {"atoms": AtomSpace(), "interval": IntervalSpace(), "circle": CircleSpace()}
    if v not in spaces:
        raise TypeError(f"unknown space {v!r}")
    return spaces[v]


# ---------------------------------------------------------------------------
# documents

def dumps(doc: dict) -> str:
    doc = dict(doc)
    doc["schema"] = SCHEMA
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _field_line(text: str, field: str) -> Optional[int]:
    key = field.split("[")[0].split(".")[-1]
    needle = f'"{key}"'
    pos = text.find(needle)
    return None if pos < 0 else text.count("\n", 0, pos) + 1


class _Reader:
    def __init__(self, path: str, text: str):
        self.path, self.text = path, text
        try:
            self.doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(path, e.lineno, "<document>", e.msg) from None
        if not isinstance(self.doc, dict):
            raise ParseError(path, 1, "<document>", "top level must be an object")
        if self.doc.get("schema") != SCHEMA:
            raise self.error("schema", f"expected {SCHEMA!r}, got {self.doc.get('schema')!r}")

    def error(self, field: str, message: str) -> ParseError:
        return ParseError(self.path, _field_line(self.text, field), field, message)

    def get(self, field: str, convert=lambda v: v, default=...):
        if field not in self.doc:
            if default is not ...:
                return default
            raise self.error(field, "missing")
        try:
            return convert(self.doc[field])
        except (TypeError, ValueError, KeyError) as e:
            raise self.error(field, str(e)) from None

    def each(self, field: str, convert):
        raw = self.get(field)
        if not isinstance(raw, list):
            raise self.error(field, "expected a list")
        out = []
        for i, v in enumerate(raw):
            try:
                out.append(convert(v))
            except (TypeError, ValueError, KeyError) as e:
                raise self.error(f"{field}[{i}]", str(e)) from None
        return out


def _positive_int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValueError(f"expected a positive integer, got {v!r}")
    return v


# -- problems ---------------------------------------------------------------

def problem_to_doc(p: MatchingProblem) -> dict:
    doc = {
        "kind": "problem",
        "name": p.name,
        "type_space": _space_name(p.type_space),
        "contract_space": _space_name(p.contract_space),
        "types": [encode_point(t) for t in p.types],
        "contracts": [encode_point(y) for y in p.contracts],
        "N": p.N,
        "population": [[encode_point(t), rational(w)] for t, w in p.population.atoms],
    }
    if p.lipschitz is not None:
        doc["lipschitz"] = rational(p.lipschitz)
    if isinstance(p.utility, gallery.GalleryUtility):
        doc["feasibility"] = "gallery"
        doc["utility"] = {"gallery": p.utility.gid, "alpha": rational(p.utility.alpha)}
        return doc
    if isinstance(p.chi_bar, AllFeasible):
        doc["feasibility"] = "all"
    else:
        doc["feasibility"] = [
            [encode_point(a), encode_point(b), [encode_point(y) for y in sorted(ys, key=point_key)]]
            for a in p.types for b in p.types
            for ys in [p.chi_bar(a, b)] if ys
        ]
    doc["utility"] = {"table": [
        [encode_point(t), encode_multiset(m), encode_value(p.u(t, m))]
        for t in p.types for m in p.choices(t)
    ]}
    return doc


def problem_from_text(text: str, path: str = "<string>") -> MatchingProblem:
    r = _Reader(path, text)
    if r.get("kind", default="problem") != "problem":
        raise r.error("kind", "expected 'problem'")
    types = tuple(r.each("types", decode_point))
    contracts = tuple(r.each("contracts", decode_point))
    N = r.get("N", _positive_int)
    population = DiscreteMeasure(r.each(
        "population", lambda rec: (decode_point(rec[0]), decode_rational(rec[1]))
    ))
    type_space = r.get("type_space", _space_from)
    contract_space = r.get("contract_space", _space_from)
    name = r.get("name", str, default="")
    lipschitz = r.get("lipschitz", decode_rational, default=None)
    utility = r.get("utility")
    if not isinstance(utility, dict):
        raise r.error("utility", "expected an object with 'table' or 'gallery'")
    try:
        if "gallery" in utility:
            gid = utility["gallery"]
            if gid not in gallery.GALLERY_IDS:
                raise r.error("utility", f"unknown gallery id {gid!r}")
            alpha = decode_rational(utility.get("alpha", "0/1"))
            allowed = frozenset(contracts)
            return gallery._problem(gid, alpha, types, population, allowed, allowed, False)
        feas_raw = r.get("feasibility")
        if feas_raw == "all":
            chi = AllFeasible(contracts)
        else:
            table = {}
            for a, b, ys in r.each("feasibility", lambda rec: (
                decode_point(rec[0]), decode_point(rec[1]), [decode_point(y) for y in rec[2]]
            )):
                table[(a, b)] = ys
            chi = TableFeasibility(table)
        if "table" not in utility:
            raise r.error("utility", "expected 'table' or 'gallery'")
        table = {}
        for i, rec in enumerate(utility["table"]):
            try:
                table[MatchedType(decode_point(rec[0]), decode_multiset(rec[1]))] = decode_rational(rec[2])
            except (TypeError, ValueError, IndexError) as e:
                raise r.error(f"utility.table[{i}]", str(e)) from None
        return MatchingProblem(type_space, contract_space, types, contracts, population, N, chi,
                               TabulatedUtility(table), lipschitz, name)
    except ValueError as e:
        if isinstance(e, ParseError):
            raise
        raise r.error("population", str(e)) from None


def read_problem(path: str) -> MatchingProblem:
    with open(path, encoding="utf-8") as fh:
        return problem_from_text(fh.read(), path)


# -- outcomes ---------------------------------------------------------------

def outcome_to_doc(o) -> dict:
    m = o.measure if isinstance(o, Outcome) else o
    return {
        "kind": "outcome",
        "atoms": [[encode_point(t), encode_multiset(ms), rational(w)] for (t, ms), w in m.atoms],
    }


def measure_from_text(text: str, path: str = "<string>") -> DiscreteMeasure:
    r = _Reader(path, text)
    if r.get("kind", default="outcome") != "outcome":
        raise r.error("kind", "expected 'outcome'")
    return DiscreteMeasure(r.each("atoms", lambda rec: (
        MatchedType(decode_point(rec[0]), decode_multiset(rec[1])), decode_rational(rec[2])
    )))


def read_outcome_measure(path: str) -> DiscreteMeasure:
    with open(path, encoding="utf-8") as fh:
        return measure_from_text(fh.read(), path)


# -- reports ----------------------------------------------------------------

def subtype_to_doc(s) -> list:
    t, m = s
    return [encode_point(t), encode_multiset(m)]


def certificate_to_doc(c: BlockCertificate) -> dict:
    return {
        "shape": {"n": c.shape.n, "edges": [list(e) for e in c.shape.edges]},
        "vertex_subtypes": [subtype_to_doc(s) for s in c.vertex_subtypes],
        "edge_contracts": [encode_point(y) for y in c.edge_contracts],
        "improving_sets": [encode_multiset(w) for w in c.improving_sets],
        "margins": [encode_value(v) for v in c.margins],
        "min_margin": encode_value(c.min_margin),
    }


def validation_to_doc(v: ValidationReport) -> dict:
    return {
        "valid": v.valid,
        "marginal_ok": v.marginal_ok,
        "feasible_ok": v.feasible_ok,
        "balance_ok": v.balance_ok,
        "summary": v.summary(),
        "marginal_errors": [[encode_point(t), rational(got), rational(want)]
                            for t, got, want in v.marginal_errors],
        "infeasible_atoms": [subtype_to_doc(s) for s in v.infeasible_atoms],
        "deficits": [[encode_point(y), rational(d)] for y, d in v.deficits.items() if d],
    }


def audit_to_doc(a: AuditReport) -> dict:
    doc = {
        "verdict": a.verdict,
        "family": a.family,
        "n_max": a.n_max,
        "eps": repr(float(a.eps)),
        "exhaustive": a.exhaustive,
        "support_size": a.support_size,
        "shapes_per_n": {str(n): c for n, c in a.shapes_per_n.items()},
        "tuples_scanned": a.tuples_scanned,
        "blocked_mass": {str(n): rational(w) for n, w in a.blocked_mass.items()},
        "individual_block": None,
        "certificate": None,
    }
    if a.individual_block is not None:
        s, W, gain = a.individual_block
        doc["individual_block"] = {"subtype": subtype_to_doc(s), "improving_set": encode_multiset(W),
                                   "margin": encode_value(gain)}
    if a.certificate is not None:
        doc["certificate"] = certificate_to_doc(a.certificate)
    return doc


def mc_to_doc(r: McReport) -> dict:
    rows = [{
        "n": row.n, "samples": row.samples, "blocked": row.blocked,
        "frequency": repr(row.frequency),
        "ci95": [repr(round(row.ci_low, 12)), repr(round(row.ci_high, 12))],
    } for row in r.rows]
    witness = None
    if isinstance(r.witness, BlockCertificate):
        witness = certificate_to_doc(r.witness)
    elif r.witness is not None:
        s, W, gain = r.witness
        witness = {"subtype": subtype_to_doc(s), "improving_set": encode_multiset(W),
                   "margin": encode_value(gain)}
    return {"verdict": "stable" if r.stable else "blocked", "family": r.family, "n_max": r.n_max,
            "seed": r.seed, "rows": rows, "witness": witness}
