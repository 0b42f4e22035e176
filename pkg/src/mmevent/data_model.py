"""Domain objects and dataset loaders.

Documents are immutable after construction. Loaders are pure functions of
file contents and raise on schema violations; `validate_document` instead
reports invariant violations as data so callers can inspect bad fixtures.

Dataset files are JSON-lines, one record per line:

* text record::

    {"doc_id": ..., "sentences": [{"id", "words", "entities": [{"start",
     "end", "type"}]}], "events": [{"type", "trigger": {"sentence_id",
     "index"}, "args": [{"role", "sentence_id", "start", "end"}]}]}

* image record::

    {"doc_id", "image_id", "file", "width", "height", "verb",
     "frames": [{"role", "box": [x1, y1, x2, y2]}]}

* multimedia test record: text-record fields plus "images" (list of
  {"id", "file", "width", "height", "objects"?}), "image_events" (list of
  {"image_id", "type" | "verb", "frames"}) and "multimedia_links"
  (list of {"text_event_idx", "image_event_idx"}).
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .errors import LoadError, MappingError, OntologyError

DEFAULT_MAX_TEXT_LENGTH = 200


@dataclass(frozen=True)
class Ontology:
    """Event-type inventory, per-type role lists and the verb->type map."""

    event_types: tuple[str, ...]
    roles_per_event: dict[str, tuple[str, ...]]
    verb_to_event: dict[str, str]
    # Training label subset for text ("target" mode); defaults to all types.
    target_types: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.event_types)) != len(self.event_types):
            raise OntologyError("event-type names must be unique")
        for etype, roles in self.roles_per_event.items():
            if not roles:
                raise OntologyError(f"role list for {etype!r} is empty")
        for verb, etype in self.verb_to_event.items():
            if etype not in self.event_types:
                raise OntologyError(
                    f"verb {verb!r} maps to unknown event type {etype!r}"
                )
        if not self.target_types:
            object.__setattr__(self, "target_types", tuple(self.event_types))
        for etype in self.target_types:
            if etype not in self.event_types:
                raise OntologyError(f"target type {etype!r} not in event_types")

    def roles_union(self) -> tuple[str, ...]:
        """All role names over all event types, ordered, deduplicated."""
        seen: dict[str, None] = {}
        for etype in self.event_types:
            for role in self.roles_per_event.get(etype, ()):
                seen.setdefault(role, None)
        return tuple(seen)


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int  # inclusive
    entity_type: str


@dataclass(frozen=True)
class Sentence:
    id: str
    words: tuple[str, ...]
    entities: tuple[EntitySpan, ...] = ()


@dataclass(frozen=True)
class ObjectBox:
    x1: int
    y1: int
    x2: int
    y2: int  # inclusive corners
    label: Optional[str] = None
    score: Optional[float] = None


@dataclass(frozen=True)
class ImageDoc:
    id: str
    source: str  # pixel file path or precomputed-encoding reference
    width: int
    height: int
    objects: tuple[ObjectBox, ...] = ()


@dataclass(frozen=True)
class ArgumentMention:
    role: str
    text_grounding: Optional[tuple[str, int, int]] = None  # (sentence id, start, end)
    visual_grounding: tuple[tuple[str, ObjectBox], ...] = ()


@dataclass(frozen=True)
class EventMention:
    event_type: str
    text_trigger: Optional[tuple[str, int]] = None  # (sentence id, word index)
    image_trigger: Optional[str] = None  # image id
    arguments: tuple[ArgumentMention, ...] = ()

    @property
    def is_multimedia(self) -> bool:
        return self.text_trigger is not None and self.image_trigger is not None


@dataclass(frozen=True)
class MultimediaDocument:
    id: str
    sentences: tuple[Sentence, ...] = ()
    images: tuple[ImageDoc, ...] = ()
    gold_events: tuple[EventMention, ...] = ()

    def sentence(self, sentence_id: str) -> Optional[Sentence]:
        for s in self.sentences:
            if s.id == sentence_id:
                return s
        return None

    def image(self, image_id: str) -> Optional[ImageDoc]:
        for m in self.images:
            if m.id == image_id:
                return m
        return None


# ---------------------------------------------------------------------------
# validation


def validate_document(
    doc: MultimediaDocument,
    ontology: Optional[Ontology] = None,
    max_text_length: int = DEFAULT_MAX_TEXT_LENGTH,
) -> list[str]:
    """Check every type invariant; return one message per violation."""
    out: list[str] = []
    sentence_ids = [s.id for s in doc.sentences]
    image_ids = [m.id for m in doc.images]
    if len(set(sentence_ids)) != len(sentence_ids):
        out.append(f"doc {doc.id}: duplicate sentence ids")
    if len(set(image_ids)) != len(image_ids):
        out.append(f"doc {doc.id}: duplicate image ids")

    for s in doc.sentences:
        L = len(s.words)
        if L < 1:
            out.append(f"sentence {s.id}: empty word list")
        if L > max_text_length:
            out.append(f"sentence {s.id}: length {L} exceeds max {max_text_length}")
        for ent in s.entities:
            if not (0 <= ent.start <= ent.end < L):
                out.append(
                    f"sentence {s.id}: entity span ({ent.start},{ent.end}) "
                    f"outside [0,{L})"
                )

    for m in doc.images:
        if m.width <= 0 or m.height <= 0:
            out.append(f"image {m.id}: non-positive dimensions")
        for box in m.objects:
            out.extend(_box_violations(box, m))

    for k, ev in enumerate(doc.gold_events):
        prefix = f"doc {doc.id} event {k}"
        if ev.text_trigger is None and ev.image_trigger is None:
            out.append(f"{prefix}: neither text nor image trigger")
        if ev.text_trigger is not None:
            sid, idx = ev.text_trigger
            sent = doc.sentence(sid)
            if sent is None:
                out.append(f"{prefix}: trigger sentence {sid!r} not in document")
            elif not (0 <= idx < len(sent.words)):
                out.append(f"{prefix}: trigger index {idx} outside sentence {sid!r}")
        if ev.image_trigger is not None and doc.image(ev.image_trigger) is None:
            out.append(f"{prefix}: trigger image {ev.image_trigger!r} not in document")
        if ontology is not None and ev.event_type not in ontology.event_types:
            out.append(f"{prefix}: unknown event type {ev.event_type!r}")
        for a in ev.arguments:
            if a.text_grounding is None and not a.visual_grounding:
                out.append(f"{prefix}: argument {a.role!r} has no grounding")
            if ontology is not None:
                roles = ontology.roles_per_event.get(ev.event_type, ())
                if a.role not in roles:
                    out.append(
                        f"{prefix}: role {a.role!r} not valid for {ev.event_type!r}"
                    )
            if a.text_grounding is not None:
                sid, start, end = a.text_grounding
                sent = doc.sentence(sid)
                if sent is None:
                    out.append(f"{prefix}: argument sentence {sid!r} not in document")
                elif not (0 <= start <= end < len(sent.words)):
                    out.append(
                        f"{prefix}: argument span ({start},{end}) outside "
                        f"sentence {sid!r} of length {len(sent.words)}"
                    )
            for image_id, box in a.visual_grounding:
                img = doc.image(image_id)
                if img is None:
                    out.append(f"{prefix}: argument image {image_id!r} not in document")
                else:
                    out.extend(_box_violations(box, img, prefix))
    return out


def _box_violations(box: ObjectBox, image: ImageDoc, prefix: str = "") -> list[str]:
    where = prefix or f"image {image.id}"
    out = []
    if not (0 <= box.x1 <= box.x2 < image.width):
        out.append(f"{where}: box x range ({box.x1},{box.x2}) outside [0,{image.width})")
    if not (0 <= box.y1 <= box.y2 < image.height):
        out.append(f"{where}: box y range ({box.y1},{box.y2}) outside [0,{image.height})")
    return out


# ---------------------------------------------------------------------------
# loading helpers


def _iter_records(path: Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(f"{path}: record {i}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise LoadError(f"{path}: record {i}: expected a JSON object")
            yield i, record


def _require(record: dict, key: str, kind, where: str):
    if key not in record:
        raise LoadError(f"{where}: missing field {key!r}")
    value = record[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise LoadError(f"{where}: field {key!r} must be a number")
        return float(value)
    if kind is int and isinstance(value, bool):
        raise LoadError(f"{where}: field {key!r} must be an integer")
    if not isinstance(value, kind):
        raise LoadError(f"{where}: field {key!r} has wrong type")
    return value


def load_ontology(path: str | Path) -> Ontology:
    """Read the ontology file: event types, per-type roles and verb map."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("event_types", "roles", "verb_map"):
        if key not in raw:
            raise LoadError(f"{path}: missing field {key!r}")
    return Ontology(
        event_types=tuple(raw["event_types"]),
        roles_per_event={t: tuple(r) for t, r in raw["roles"].items()},
        verb_to_event=dict(raw["verb_map"]),
        target_types=tuple(raw.get("target_types", ())),
    )


def _parse_sentence(raw: dict, where: str) -> Sentence:
    sid = _require(raw, "id", str, where)
    words = tuple(_require(raw, "words", list, where))
    if not words:
        raise LoadError(f"{where}: sentence {sid!r} has no words")
    entities = []
    for j, ent in enumerate(raw.get("entities", ())):
        ent_where = f"{where}: sentence {sid!r} entity {j}"
        start = _require(ent, "start", int, ent_where)
        end = _require(ent, "end", int, ent_where)
        if not (0 <= start <= end < len(words)):
            raise LoadError(f"{ent_where}: span ({start},{end}) outside [0,{len(words)})")
        entities.append(EntitySpan(start, end, _require(ent, "type", str, ent_where)))
    return Sentence(id=sid, words=words, entities=tuple(entities))


def _parse_text_event(raw: dict, ontology: Ontology, where: str) -> EventMention:
    etype = _require(raw, "type", str, where)
    if etype not in ontology.event_types:
        raise OntologyError(f"{where}: unknown event type {etype!r}")
    trig = _require(raw, "trigger", dict, where)
    trigger = (
        _require(trig, "sentence_id", str, f"{where}: trigger"),
        _require(trig, "index", int, f"{where}: trigger"),
    )
    args = []
    for j, arg in enumerate(raw.get("args", ())):
        arg_where = f"{where}: arg {j}"
        role = _require(arg, "role", str, arg_where)
        if role not in ontology.roles_per_event.get(etype, ()):
            raise OntologyError(
                f"{arg_where}: role {role!r} not valid for event type {etype!r}"
            )
        args.append(
            ArgumentMention(
                role=role,
                text_grounding=(
                    _require(arg, "sentence_id", str, arg_where),
                    _require(arg, "start", int, arg_where),
                    _require(arg, "end", int, arg_where),
                ),
            )
        )
    return EventMention(event_type=etype, text_trigger=trigger, arguments=tuple(args))


def load_text_dataset(
    path: str | Path,
    ontology: Ontology,
    max_text_length: int = DEFAULT_MAX_TEXT_LENGTH,
) -> list[MultimediaDocument]:
    """Load text-annotated documents (gold textual events, no images)."""
    docs = []
    for i, record in _iter_records(Path(path)):
        where = f"{path}: record {i}"
        doc_id = _require(record, "doc_id", str, where)
        sentences = tuple(
            _parse_sentence(s, where) for s in _require(record, "sentences", list, where)
        )
        for s in sentences:
            if len(s.words) > max_text_length:
                raise LoadError(
                    f"{where}: sentence {s.id!r} length {len(s.words)} exceeds "
                    f"max {max_text_length}"
                )
        events = tuple(
            _parse_text_event(e, ontology, f"{where}: event {j}")
            for j, e in enumerate(record.get("events", ()))
        )
        docs.append(MultimediaDocument(id=doc_id, sentences=sentences, gold_events=events))
    return docs


def _parse_box(raw: list, where: str) -> ObjectBox:
    if not isinstance(raw, list) or len(raw) != 4:
        raise LoadError(f"{where}: box must be [x1,y1,x2,y2]")
    x1, y1, x2, y2 = (int(v) for v in raw)
    if x2 < x1 or y2 < y1:
        raise LoadError(f"{where}: degenerate box corners {raw}")
    return ObjectBox(x1, y1, x2, y2)


def load_image_dataset(
    path: str | Path,
    ontology: Ontology,
    strict: bool = False,
) -> list[MultimediaDocument]:
    """Load image-annotated documents (gold visual events, no sentences).

    Records whose verb is absent from the ontology verb map raise
    `MappingError` when `strict`, otherwise the image is kept as a
    negative example without an event.
    """
    by_doc: dict[str, dict] = {}
    for i, record in _iter_records(Path(path)):
        where = f"{path}: record {i}"
        doc_id = _require(record, "doc_id", str, where)
        image_id = _require(record, "image_id", str, where)
        width = _require(record, "width", int, where)
        height = _require(record, "height", int, where)
        if width <= 0 or height <= 0:
            raise LoadError(f"{where}: non-positive image dimensions")
        verb = _require(record, "verb", str, where)

        event = None
        boxes: list[ObjectBox] = []
        if verb in ontology.verb_to_event:
            etype = ontology.verb_to_event[verb]
            args = []
            for j, frame in enumerate(record.get("frames", ())):
                frame_where = f"{where}: frame {j}"
                role = _require(frame, "role", str, frame_where)
                if role not in ontology.roles_per_event.get(etype, ()):
                    raise OntologyError(
                        f"{frame_where}: role {role!r} not valid for {etype!r}"
                    )
                box = _parse_box(frame.get("box"), frame_where)
                if box.x2 >= width or box.y2 >= height:
                    raise LoadError(f"{frame_where}: box outside image bounds")
                boxes.append(box)
                args.append(ArgumentMention(role=role, visual_grounding=((image_id, box),)))
            event = EventMention(
                event_type=etype, image_trigger=image_id, arguments=tuple(args)
            )
        elif strict:
            raise MappingError(f"{where}: verb {verb!r} not in the verb map")

        entry = by_doc.setdefault(doc_id, {"images": [], "events": []})
        entry["images"].append(
            ImageDoc(
                id=image_id,
                source=_require(record, "file", str, where),
                width=width,
                height=height,
                objects=tuple(boxes),
            )
        )
        if event is not None:
            entry["events"].append(event)

    return [
        MultimediaDocument(
            id=doc_id,
            images=tuple(entry["images"]),
            gold_events=tuple(entry["events"]),
        )
        for doc_id, entry in by_doc.items()
    ]


def load_multimedia_dataset(
    path: str | Path,
    ontology: Ontology,
    max_text_length: int = DEFAULT_MAX_TEXT_LENGTH,
) -> list[MultimediaDocument]:
    """Load multimedia test documents with gold coreference links.

    Linked (text event, image event) pairs are merged into a single
    multimedia `EventMention` carrying both triggers and the union of
    arguments; unlinked events stay unimodal.
    """
    docs = []
    for i, record in _iter_records(Path(path)):
        where = f"{path}: record {i}"
        doc_id = _require(record, "doc_id", str, where)
        sentences = tuple(
            _parse_sentence(s, where) for s in record.get("sentences", ())
        )
        for s in sentences:
            if len(s.words) > max_text_length:
                raise LoadError(f"{where}: sentence {s.id!r} exceeds max length")

        images = []
        for j, img in enumerate(record.get("images", ())):
            img_where = f"{where}: image {j}"
            images.append(
                ImageDoc(
                    id=_require(img, "id", str, img_where),
                    source=_require(img, "file", str, img_where),
                    width=_require(img, "width", int, img_where),
                    height=_require(img, "height", int, img_where),
                    objects=tuple(
                        _parse_box(b, img_where) for b in img.get("objects", ())
                    ),
                )
            )

        text_events = [
            _parse_text_event(e, ontology, f"{where}: event {j}")
            for j, e in enumerate(record.get("events", ()))
        ]

        image_events = []
        for j, raw in enumerate(record.get("image_events", ())):
            ev_where = f"{where}: image_event {j}"
            image_id = _require(raw, "image_id", str, ev_where)
            if "type" in raw:
                etype = raw["type"]
            elif "verb" in raw:
                verb = raw["verb"]
                if verb not in ontology.verb_to_event:
                    raise MappingError(f"{ev_where}: verb {verb!r} not in the verb map")
                etype = ontology.verb_to_event[verb]
            else:
                raise LoadError(f"{ev_where}: missing field 'type' or 'verb'")
            if etype not in ontology.event_types:
                raise OntologyError(f"{ev_where}: unknown event type {etype!r}")
            args = []
            for k, frame in enumerate(raw.get("frames", ())):
                frame_where = f"{ev_where}: frame {k}"
                role = _require(frame, "role", str, frame_where)
                if role not in ontology.roles_per_event.get(etype, ()):
                    raise OntologyError(f"{frame_where}: role {role!r} invalid for {etype!r}")
                box = _parse_box(frame.get("box"), frame_where)
                args.append(ArgumentMention(role=role, visual_grounding=((image_id, box),)))
            image_events.append(
                EventMention(event_type=etype, image_trigger=image_id, arguments=tuple(args))
            )

        linked_text: set[int] = set()
        linked_image: set[int] = set()
        merged: list[EventMention] = []
        for j, link in enumerate(record.get("multimedia_links", ())):
            link_where = f"{where}: multimedia_link {j}"
            ti = _require(link, "text_event_idx", int, link_where)
            vi = _require(link, "image_event_idx", int, link_where)
            if not (0 <= ti < len(text_events)) or not (0 <= vi < len(image_events)):
                raise LoadError(f"{link_where}: event index out of range")
            te, ve = text_events[ti], image_events[vi]
            if te.event_type != ve.event_type:
                raise LoadError(
                    f"{link_where}: linked events have different types "
                    f"({te.event_type!r} vs {ve.event_type!r})"
                )
            linked_text.add(ti)
            linked_image.add(vi)
            merged.append(
                replace(
                    te,
                    image_trigger=ve.image_trigger,
                    arguments=te.arguments + ve.arguments,
                )
            )

        gold = (
            tuple(merged)
            + tuple(e for j, e in enumerate(text_events) if j not in linked_text)
            + tuple(e for j, e in enumerate(image_events) if j not in linked_image)
        )
        docs.append(
            MultimediaDocument(
                id=doc_id, sentences=sentences, images=tuple(images), gold_events=gold
            )
        )
    return docs


# ---------------------------------------------------------------------------
# serialization


def argument_to_record(arg: ArgumentMention) -> dict:
    out: dict = {"role": arg.role}
    if arg.text_grounding is not None:
        sid, start, end = arg.text_grounding
        out["text"] = {"sentence_id": sid, "start": start, "end": end}
    if arg.visual_grounding:
        out["visual"] = [
            {"image_id": image_id, "box": [b.x1, b.y1, b.x2, b.y2]}
            for image_id, b in arg.visual_grounding
        ]
    return out


def argument_from_record(raw: dict) -> ArgumentMention:
    text = raw.get("text")
    return ArgumentMention(
        role=raw["role"],
        text_grounding=(
            (text["sentence_id"], text["start"], text["end"]) if text else None
        ),
        visual_grounding=tuple(
            (v["image_id"], ObjectBox(*v["box"])) for v in raw.get("visual", ())
        ),
    )


def event_to_record(event: EventMention) -> dict:
    out: dict = {"type": event.event_type}
    if event.text_trigger is not None:
        out["text_trigger"] = {
            "sentence_id": event.text_trigger[0],
            "index": event.text_trigger[1],
        }
    if event.image_trigger is not None:
        out["image_trigger"] = event.image_trigger
    out["args"] = [argument_to_record(a) for a in event.arguments]
    return out


def event_from_record(raw: dict) -> EventMention:
    trig = raw.get("text_trigger")
    return EventMention(
        event_type=raw["type"],
        text_trigger=(trig["sentence_id"], trig["index"]) if trig else None,
        image_trigger=raw.get("image_trigger"),
        arguments=tuple(argument_from_record(a) for a in raw.get("args", ())),
    )


def document_to_record(doc: MultimediaDocument) -> dict:
    return {
        "doc_id": doc.id,
        "sentences": [
            {
                "id": s.id,
                "words": list(s.words),
                "entities": [
                    {"start": e.start, "end": e.end, "type": e.entity_type}
                    for e in s.entities
                ],
            }
            for s in doc.sentences
        ],
        "images": [
            {
                "id": m.id,
                "file": m.source,
                "width": m.width,
                "height": m.height,
                "objects": [[b.x1, b.y1, b.x2, b.y2] for b in m.objects],
            }
            for m in doc.images
        ],
        "gold_events": [event_to_record(e) for e in doc.gold_events],
    }


def document_from_record(raw: dict) -> MultimediaDocument:
    return MultimediaDocument(
        id=raw["doc_id"],
        sentences=tuple(
            Sentence(
                id=s["id"],
                words=tuple(s["words"]),
                entities=tuple(
                    EntitySpan(e["start"], e["end"], e["type"])
                    for e in s.get("entities", ())
                ),
            )
            for s in raw.get("sentences", ())
        ),
        images=tuple(
            ImageDoc(
                id=m["id"],
                source=m["file"],
                width=m["width"],
                height=m["height"],
                objects=tuple(ObjectBox(*b) for b in m.get("objects", ())),
            )
            for m in raw.get("images", ())
        ),
        gold_events=tuple(event_from_record(e) for e in raw.get("gold_events", ())),
    )
