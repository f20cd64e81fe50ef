"""Query model: weighted objects plus relation triplets, and the three-line
grounding text format they are parsed from.

A query names the objects a detector should look for (key objects are what
the question is about, cue objects are context that helps locate them) and
a list of (subject, relation type, object) triplets that frames can be
checked against.
"""

from __future__ import annotations

import enum
import json
import re
import warnings
from dataclasses import dataclass, replace

from .errors import InputError

__all__ = [
    "RelationType",
    "RelationTriplet",
    "WeightedObject",
    "QuerySpec",
    "GroundingParseError",
    "MissingSection",
    "MalformedTriplet",
    "UnknownRelationType",
    "NoKeyObjects",
    "QueryValidationWarning",
    "normalize_label",
    "parse_grounding_text",
    "to_grounding_text",
    "validate_query",
    "query_from_json",
    "query_to_json",
]

DEFAULT_KEY_WEIGHT = 1.0
DEFAULT_CUE_WEIGHT = 0.5


class GroundingParseError(InputError):
    """Parse failure; carries a 1-based line number when one is known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class MissingSection(GroundingParseError):
    pass


class MalformedTriplet(GroundingParseError):
    pass


class UnknownRelationType(GroundingParseError):
    pass


class NoKeyObjects(InputError):
    pass


class QueryValidationWarning(UserWarning):
    """Non-fatal query repair, e.g. an auto-added relation endpoint."""


class RelationType(enum.Enum):
    SPATIAL = "spatial"
    ATTRIBUTE = "attribute"
    TIME = "time"
    CAUSAL = "causal"


# Accepted spellings for relation type tokens. "temporal" shows up in the
# wild as a synonym for "time"; everything else is rejected.
_REL_TOKEN_ALIASES = {
    "spatial": RelationType.SPATIAL,
    "attribute": RelationType.ATTRIBUTE,
    "time": RelationType.TIME,
    "temporal": RelationType.TIME,
    "causal": RelationType.CAUSAL,
}


def normalize_label(label: str) -> str:
    """Canonical form used for all label comparisons: collapse whitespace,
    casefold. Raw labels keep their original spelling."""
    return " ".join(label.split()).casefold()


@dataclass(frozen=True)
class RelationTriplet:
    subject: str
    rel_type: RelationType
    object: str

    def __post_init__(self):
        if not self.subject.strip() or not self.object.strip():
            raise MalformedTriplet("relation endpoints must be non-empty")
        object.__setattr__(self, "subject", self.subject.strip())
        object.__setattr__(self, "object", self.object.strip())
        same = normalize_label(self.subject) == normalize_label(self.object)
        if same and self.rel_type is not RelationType.TIME:
            raise MalformedTriplet(
                f"subject equals object in a {self.rel_type.value} relation "
                "(only time relations may repeat a label)"
            )


@dataclass(frozen=True)
class WeightedObject:
    label: str
    weight: float
    kind: str  # "key" | "cue"

    def __post_init__(self):
        if not self.label.strip():
            raise InputError("object label must be non-empty")
        object.__setattr__(self, "label", self.label.strip())
        if not 0.0 < self.weight <= 1.0:
            raise InputError(f"object weight must be in (0, 1], got {self.weight}")
        if self.kind not in ("key", "cue"):
            raise InputError(f"object kind must be 'key' or 'cue', got {self.kind!r}")


@dataclass(frozen=True)
class QuerySpec:
    question: str = ""
    objects: tuple[WeightedObject, ...] = ()
    relations: tuple[RelationTriplet, ...] = ()

    @property
    def key_objects(self) -> tuple[WeightedObject, ...]:
        return tuple(o for o in self.objects if o.kind == "key")

    @property
    def cue_objects(self) -> tuple[WeightedObject, ...]:
        return tuple(o for o in self.objects if o.kind == "cue")

    def vocabulary(self) -> list[str]:
        """Detector search space: all declared labels, keys first."""
        return [o.label for o in self.key_objects] + [o.label for o in self.cue_objects]

    def weight_of(self, detection_label: str) -> float | None:
        """Weight of the query object matching a detector label, or None."""
        wanted = normalize_label(detection_label)
        for o in self.objects:
            if normalize_label(o.label) == wanted:
                return o.weight
        return None


_TRIPLET_RE = re.compile(r"\(([^()]*)\)")


def _split_labels(payload: str) -> list[str]:
    return [part.strip() for part in payload.split(",") if part.strip()]


def _parse_relations(payload: str, line_no: int) -> list[RelationTriplet]:
    payload = payload.strip()
    if not payload:
        return []
    groups = _TRIPLET_RE.findall(payload)
    leftover = _TRIPLET_RE.sub("", payload).replace(",", "").strip()
    if not groups or leftover:
        raise MalformedTriplet(
            f"relations must be comma-separated parenthesized triplets, got {payload!r}",
            line=line_no,
        )
    triplets = []
    for group in groups:
        parts = [p.strip() for p in group.split(";")]
        if len(parts) != 3:
            raise MalformedTriplet(
                f"triplet {group!r} must have exactly 3 semicolon-separated parts",
                line=line_no,
            )
        subject, rel_token, obj = parts
        rel_type = _REL_TOKEN_ALIASES.get(rel_token.strip().casefold())
        if rel_type is None:
            raise UnknownRelationType(
                f"unknown relation type {rel_token!r} in {group!r}", line=line_no
            )
        try:
            triplets.append(RelationTriplet(subject, rel_type, obj))
        except MalformedTriplet as exc:
            raise MalformedTriplet(str(exc), line=line_no) from None
    return triplets


def parse_grounding_text(text: str, question: str = "") -> QuerySpec:
    """Parse the three-line grounding format into a QuerySpec.

    The format is one line per section, starting with the exact prefixes
    "Key Objects:", "Cue Objects:" and "Rel:". Sections may appear in any
    order; unrelated lines are ignored; the first occurrence of each
    section wins. Key objects default to weight 1.0, cues to 0.5.
    """
    key_payload = None
    cue_payload = None
    rel_payload = None
    rel_line_no = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("Key Objects:") and key_payload is None:
            key_payload = stripped[len("Key Objects:"):]
        elif stripped.startswith("Cue Objects:") and cue_payload is None:
            cue_payload = stripped[len("Cue Objects:"):]
        elif stripped.startswith("Rel:") and rel_payload is None:
            rel_payload = stripped[len("Rel:"):]
            rel_line_no = line_no
    if key_payload is None:
        raise MissingSection('no "Key Objects:" line found')

    objects = [
        WeightedObject(label, DEFAULT_KEY_WEIGHT, "key")
        for label in _split_labels(key_payload)
    ]
    objects += [
        WeightedObject(label, DEFAULT_CUE_WEIGHT, "cue")
        for label in _split_labels(cue_payload or "")
    ]
    relations = _parse_relations(rel_payload or "", rel_line_no)
    return QuerySpec(question=question, objects=tuple(objects), relations=tuple(relations))


def to_grounding_text(query: QuerySpec) -> str:
    """Serialize back to the three-line format (inverse of parsing for
    queries that use the default weights)."""
    keys = ", ".join(o.label for o in query.key_objects)
    cues = ", ".join(o.label for o in query.cue_objects)
    rels = ", ".join(
        f"({r.subject}; {r.rel_type.value}; {r.object})" for r in query.relations
    )
    return f"Key Objects: {keys}\nCue Objects: {cues}\nRel: {rels}\n"


def validate_query(query: QuerySpec) -> QuerySpec:
    """Normalize a parsed query: merge duplicate labels (max weight wins,
    key kind wins), auto-append undeclared relation endpoints as cue
    objects, and reject queries without key objects.

    Auto-appended endpoints are reported via QueryValidationWarning so
    callers can surface them; they are not errors because attribute-ish
    endpoints ("red clothes") routinely appear only inside triplets.

    Idempotent: validating a validated query is the identity.
    """
    merged: dict[str, WeightedObject] = {}
    for obj in query.objects:
        norm = normalize_label(obj.label)
        prev = merged.get(norm)
        if prev is None:
            merged[norm] = obj
        else:
            kind = "key" if "key" in (prev.kind, obj.kind) else "cue"
            merged[norm] = WeightedObject(prev.label, max(prev.weight, obj.weight), kind)

    for rel in query.relations:
        for endpoint in (rel.subject, rel.object):
            norm = normalize_label(endpoint)
            if norm not in merged:
                merged[norm] = WeightedObject(endpoint, DEFAULT_CUE_WEIGHT, "cue")
                warnings.warn(
                    f"relation endpoint {endpoint!r} not declared; "
                    "added as cue object with weight 0.5",
                    QueryValidationWarning,
                    stacklevel=2,
                )

    objects = tuple(
        sorted(merged.values(), key=lambda o: (o.kind != "key", normalize_label(o.label)))
    )
    if not any(o.kind == "key" for o in objects):
        raise NoKeyObjects("query declares no key objects")
    return replace(query, objects=objects)


def query_to_json(query: QuerySpec) -> dict:
    return {
        "question": query.question,
        "key_objects": [
            {"label": o.label, "weight": o.weight} for o in query.key_objects
        ],
        "cue_objects": [
            {"label": o.label, "weight": o.weight} for o in query.cue_objects
        ],
        "relations": [
            {"subject": r.subject, "type": r.rel_type.value, "object": r.object}
            for r in query.relations
        ],
    }


def query_from_json(doc: dict | str) -> QuerySpec:
    """Load a QuerySpec from the structured JSON form (the parsed-text
    equivalent for pipelines that skip grounding text)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise InputError(f"query JSON is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError("query JSON must be an object")
    try:
        objects = [
            WeightedObject(o["label"], float(o.get("weight", DEFAULT_KEY_WEIGHT)), "key")
            for o in doc.get("key_objects", [])
        ]
        objects += [
            WeightedObject(o["label"], float(o.get("weight", DEFAULT_CUE_WEIGHT)), "cue")
            for o in doc.get("cue_objects", [])
        ]
        relations = []
        for r in doc.get("relations", []):
            rel_type = _REL_TOKEN_ALIASES.get(str(r["type"]).strip().casefold())
            if rel_type is None:
                raise UnknownRelationType(f"unknown relation type {r['type']!r}")
            relations.append(RelationTriplet(r["subject"], rel_type, r["object"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed query JSON: {exc}") from None
    return QuerySpec(
        question=str(doc.get("question", "")),
        objects=tuple(objects),
        relations=tuple(relations),
    )
