"""JSON model documents: loading, schema checks and conversion to objects.

Ids may be strings, numbers or lists (lists become tuples).  Complex values
are written either as a number or as ``{"re": .., "im": ..}``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any

import jsonschema

from .algebra import AlgebraElement
from .errors import DocumentError, DuplicateId, ParseError, SchemaError
from .graphs import DirectedGraph, Potential, graph_from_document, potential_from_document
from .groupoid import Groupoid, UnitMeasure, _as_id, validate_groupoid

KINDS = ("groupoid", "graph", "algebra-element", "potential", "measure")

_ID = {"type": ["string", "integer", "array"]}
_NUM = {"type": "number"}
_COMPLEX = {
    "oneOf": [
        _NUM,
        {"type": "object", "properties": {"re": _NUM, "im": _NUM}, "required": ["re"], "additionalProperties": False},
    ]
}


def _records(props: dict, required=None) -> dict:
    return {
        "type": "array",
        "items": {"type": "object", "properties": props, "required": required or list(props), "additionalProperties": False},
    }


SCHEMAS = {
    "groupoid": {
        "type": "object",
        "properties": {
            "kind": {"const": "groupoid"},
            "name": {"type": "string"},
            "units": {"type": "array", "items": _ID},
            "arrows": _records({"id": _ID, "src": _ID, "tgt": _ID}),
            "compose": _records({"left": _ID, "right": _ID, "result": _ID}),
            "inverse": _records({"of": _ID, "is": _ID}),
            "unit_arrow": _records({"unit": _ID, "arrow": _ID}),
        },
        "required": ["kind", "units", "arrows", "compose", "inverse"],
        "additionalProperties": False,
    },
    "graph": {
        "type": "object",
        "properties": {
            "kind": {"const": "graph"},
            "name": {"type": "string"},
            "vertices": {"type": "array", "items": _ID},
            "edges": _records({"id": _ID, "src": _ID, "tgt": _ID}),
            "infinite_emitters": {"type": "array", "items": _ID},
        },
        "required": ["kind", "vertices", "edges"],
        "additionalProperties": False,
    },
    "algebra-element": {
        "type": "object",
        "properties": {
            "kind": {"const": "algebra-element"},
            "terms": _records({"arrow": _ID, "value": _COMPLEX}),
        },
        "required": ["kind", "terms"],
        "additionalProperties": False,
    },
    "potential": {
        "type": "object",
        "properties": {
            "kind": {"const": "potential"},
            "depth": {"type": "integer", "minimum": 1},
            "table": _records({"word": {"type": "array", "items": _ID, "minItems": 1}, "value": _NUM}),
        },
        "required": ["kind", "depth", "table"],
        "additionalProperties": False,
    },
    "measure": {
        "type": "object",
        "properties": {
            "kind": {"const": "measure"},
            "mass": _records({"unit": _ID, "value": {"type": "number", "minimum": 0}}),
        },
        "required": ["kind", "mass"],
        "additionalProperties": False,
    },
}


def _key(v):
    return json.dumps(v, sort_keys=True)


def _unique(values, what: str, where: str):
    seen = set()
    for i, v in enumerate(values):
        k = _key(v)
        if k in seen:
            raise DuplicateId(f"duplicate {what} {v!r} at {where}/{i}")
        seen.add(k)


def _check_ids(doc: dict):
    kind = doc["kind"]
    if kind == "groupoid":
        _unique(doc["units"], "unit", "/units")
        _unique([a["id"] for a in doc["arrows"]], "arrow id", "/arrows")
    elif kind == "graph":
        _unique(doc["vertices"], "vertex", "/vertices")
        _unique([e["id"] for e in doc["edges"]], "edge id", "/edges")
    elif kind == "algebra-element":
        _unique([t["arrow"] for t in doc["terms"]], "arrow", "/terms")
    elif kind == "potential":
        _unique([t["word"] for t in doc["table"]], "word", "/table")
    elif kind == "measure":
        _unique([t["unit"] for t in doc["mass"]], "unit", "/mass")


def validate_document(doc: Any, expect: str | None = None) -> dict:
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object", "/")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"'kind' must be one of {', '.join(KINDS)}", "/kind")
    if expect is not None and kind != expect:
        raise SchemaError(f"expected a {expect} document, got {kind}", "/kind")
    validator = jsonschema.Draft202012Validator(SCHEMAS[kind])
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        loc = "/" + "/".join(map(str, err.absolute_path))
        raise SchemaError(err.message, loc)
    _check_ids(doc)
    return doc


@dataclass(frozen=True)
class ModelDocument:
    kind: str
    payload: dict
    source: str = ""
    digest: str = ""

    def groupoid(self) -> Groupoid:
        self._expect("groupoid")
        return validate_groupoid(self.payload, name=self.payload.get("name", ""))

    def graph(self) -> DirectedGraph:
        self._expect("graph")
        return graph_from_document(self.payload)

    def potential(self) -> Potential:
        self._expect("potential")
        return potential_from_document(self.payload)

    def element(self, g: Groupoid) -> AlgebraElement:
        self._expect("algebra-element")
        coeffs = {}
        for t in self.payload["terms"]:
            a = _as_id(t["arrow"])
            if not g.has_arrow(a):
                raise SchemaError(f"unknown arrow {t['arrow']!r}", "/terms")
            coeffs[a] = _complex(t["value"])
        return AlgebraElement.from_mapping(g, coeffs)

    def measure(self, g: Groupoid) -> UnitMeasure:
        self._expect("measure")
        mass = {}
        for t in self.payload["mass"]:
            x = _as_id(t["unit"])
            if not g.has_unit(x):
                raise SchemaError(f"unknown unit {t['unit']!r}", "/mass")
            mass[x] = float(t["value"])
        return UnitMeasure.from_mapping(g, mass)

    def _expect(self, kind):
        if self.kind != kind:
            raise SchemaError(f"expected a {kind} document, got {self.kind}", "/kind")


def _complex(v) -> complex:
    if isinstance(v, dict):
        return complex(v["re"], v.get("im", 0.0))
    return complex(v)


def parse_model(text: str | bytes, source: str = "<string>") -> ModelDocument:
    raw = text.encode() if isinstance(text, str) else text
    try:
        decoded = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{source}: not UTF-8", exc.start) from None
    try:
        doc = json.loads(decoded)
    except json.JSONDecodeError as exc:
        offset = len(decoded[: exc.pos].encode())
        raise ParseError(f"{source}: {exc.msg} at byte {offset}", offset) from None
    validate_document(doc)
    return ModelDocument(doc["kind"], doc, source, hashlib.sha256(raw).hexdigest())


def load_model(path, expect: str | None = None) -> ModelDocument:
    p = FsPath(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None
    doc = parse_model(raw, str(path))
    if expect is not None:
        doc._expect(expect)
    return doc


def dump_document(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def element_document(f: AlgebraElement, tol: float = 0.0) -> dict:
    def enc(v):
        return [enc(x) for x in v] if isinstance(v, tuple) else v

    terms = []
    for a, v in f.as_dict(tol).items():
        val = v.real if v.imag == 0 else {"re": v.real, "im": v.imag}
        terms.append({"arrow": enc(a), "value": val})
    return {"kind": "algebra-element", "terms": terms}


def measure_document(mu: UnitMeasure) -> dict:
    def enc(v):
        return [enc(x) for x in v] if isinstance(v, tuple) else v

    return {"kind": "measure", "mass": [{"unit": enc(x), "value": v} for x, v in mu.as_dict().items()]}
