"""Synthetic desk-scale corpus generator.

Builds a small world where cross-modality augmentation genuinely helps:

* some trigger words are ambiguous between two event types and only the
  document's images resolve them;
* held-out images are rendered from partly unseen visual vocabulary (with
  a confuser token borrowed from another type), so an image-only
  classifier degrades while the document's sentences still disambiguate;
* the word -> visual-token world map is shared by the fixture image
  generator and captioner, so generated data and "real" data overlap.

`python -m mmevent.synth OUT_DIR [--seed N]` materializes ontology,
datasets, fixture tables, image bytes and a ready-to-run config file.
"""

import argparse
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_model import Ontology
from .fixtures import render_visual_bytes
from .seeding import stable_seed

FILLERS = ("the", "near", "old", "grey", "town", "quiet", "morning", "beside")

TYPE_SPECS: dict[str, dict] = {
    "conflict.attack": {
        "trigger": "shelled",
        "verb": "assaulting",
        "roles": ("attacker", "target"),
        "args": ("garrison", "artillery", "barricade", "trenches", "shrapnel", "bunker"),
    },
    "contact.meet": {
        "trigger": "convened",
        "verb": "convening",
        "roles": ("participant", "place"),
        "args": ("diplomats", "summit", "delegates", "podium", "chamber", "accord"),
    },
    "movement.transport": {
        "trigger": "hauled",
        "verb": "hauling",
        "roles": ("agent", "destination"),
        "args": ("convoy", "freight", "harbor", "caravan", "depot", "railcar"),
    },
    "disaster.fire": {
        "trigger": "smoldered",
        "verb": "burning",
        "roles": ("place", "instrument"),
        "args": ("warehouse", "embers", "alarm", "charred", "kindling", "soot"),
    },
}

# Trigger words used by two types; only the images disambiguate them.
SHARED_TRIGGERS = {
    "engaged": ("conflict.attack", "contact.meet"),
    "raced": ("movement.transport", "disaster.fire"),
}

# Held-out images of a type borrow one training token from this other type.
VISUAL_CONFUSER = {
    "conflict.attack": "disaster.fire",
    "disaster.fire": "conflict.attack",
    "contact.meet": "movement.transport",
    "movement.transport": "contact.meet",
}

NEGATIVE_VERB = "juggling"
NEGATIVE_TOKENS = ("confetti", "balloons")

TYPES = tuple(TYPE_SPECS)


def synth_ontology() -> Ontology:
    return Ontology(
        event_types=TYPES,
        roles_per_event={t: spec["roles"] for t, spec in TYPE_SPECS.items()},
        verb_to_event={spec["verb"]: t for t, spec in TYPE_SPECS.items()},
    )


def _role_of(event_type: str, word: str) -> str:
    spec = TYPE_SPECS[event_type]
    return spec["roles"][spec["args"].index(word) % len(spec["roles"])]


def _shared_trigger_for(event_type: str) -> str | None:
    for word, pair in SHARED_TRIGGERS.items():
        if event_type in pair:
            return word
    return None


def world_map() -> dict[str, str]:
    """word -> visual token; ambiguous triggers deliberately unmapped."""
    mapping: dict[str, str] = {}
    for etype, spec in TYPE_SPECS.items():
        mapping[spec["trigger"]] = spec["trigger"]
        for word in spec["args"]:
            mapping[word] = word
    return mapping


def caption_vocab() -> list[str]:
    # Fillers keep captions shaped like ordinary sentences, so caption CLS
    # vectors (training context) and sentence CLS vectors (inference
    # context) live in the same region.
    vocab: list[str] = list(FILLERS)
    for spec in TYPE_SPECS.values():
        vocab.append(spec["trigger"])
        vocab.extend(spec["args"])
    return vocab


def train_tokens(event_type: str) -> list[str]:
    return list(TYPE_SPECS[event_type]["args"][:3])


def test_tokens(event_type: str) -> list[str]:
    spec = TYPE_SPECS[event_type]
    confuser = TYPE_SPECS[VISUAL_CONFUSER[event_type]]["args"][1]
    return [spec["args"][0], spec["args"][3], confuser]


# ---------------------------------------------------------------------------
# record builders


def _sentence_record(sid: str, event_type: str, trigger_word: str,
                     arg_words: list[str], rng) -> tuple[dict, dict]:
    f = [FILLERS[int(rng.integers(len(FILLERS)))] for _ in range(4)]
    words = [f[0], arg_words[0], f[1], trigger_word, f[2], arg_words[1], f[3]]
    sentence = {
        "id": sid,
        "words": words,
        "entities": [
            {"start": 1, "end": 1, "type": "synthetic"},
            {"start": 5, "end": 5, "type": "synthetic"},
            {"start": 6, "end": 6, "type": "synthetic"},  # distractor
        ],
    }
    event = {
        "type": event_type,
        "trigger": {"sentence_id": sid, "index": 3},
        "args": [
            {"role": _role_of(event_type, arg_words[0]),
             "sentence_id": sid, "start": 1, "end": 1},
            {"role": _role_of(event_type, arg_words[1]),
             "sentence_id": sid, "start": 5, "end": 5},
        ],
    }
    return sentence, event


def build_text_docs(n_docs: int, seed: int, sentences_per_doc: int = 8) -> list[dict]:
    records = []
    for i in range(n_docs):
        rng = np.random.default_rng(stable_seed("textdoc", seed, i))
        sentences, events = [], []
        for s in range(sentences_per_doc):
            etype = TYPES[(2 * i + s) % len(TYPES)]
            spec = TYPE_SPECS[etype]
            shared = _shared_trigger_for(etype)
            use_shared = shared is not None and rng.random() < 0.4
            trigger = shared if use_shared else spec["trigger"]
            k = (i + 3 * s) % 6
            arg_words = [spec["args"][k], spec["args"][(k + 2) % 6]]
            sentence, event = _sentence_record(
                f"t{i}s{s}", etype, trigger, arg_words, rng
            )
            sentences.append(sentence)
            events.append(event)
        records.append({"doc_id": f"tdoc{i}", "sentences": sentences, "events": events})
    return records


def _token_slot(tokens: list[str], word: str, n_slots: int = 16,
                noise_slots: int = 2) -> int:
    ordered = sorted(tokens)
    for s in range(n_slots - noise_slots):
        if ordered[s % len(ordered)] == word:
            return s
    raise ValueError(f"{word!r} not rendered in {tokens}")


def _slot_box(slot: int, cols: int = 4, patch: int = 16) -> list[int]:
    row, col = slot // cols, slot % cols
    return [col * patch, row * patch, col * patch + patch - 1, row * patch + patch - 1]


def build_image_docs(n_docs: int, seed: int, image_dir: Path) -> list[dict]:
    image_dir.mkdir(parents=True, exist_ok=True)
    records = []
    counter = 0
    for i in range(n_docs):
        for j in range(4):
            image_id = f"img{i}_{j}"
            path = image_dir / f"{image_id}.bin"
            if counter % 10 == 9:
                # Unmapped-verb negative.
                tokens = list(NEGATIVE_TOKENS)
                verb = NEGATIVE_VERB
                frames = []
            else:
                etype = TYPES[counter % len(TYPES)]
                spec = TYPE_SPECS[etype]
                tokens = train_tokens(etype)
                verb = spec["verb"]
                frames = [
                    {
                        "role": _role_of(etype, word),
                        "box": _slot_box(_token_slot(tokens, word)),
                    }
                    for word in tokens[:2]
                ]
            path.write_bytes(
                render_visual_bytes(tokens, noise_seed=stable_seed("img", seed, image_id))
            )
            records.append(
                {
                    "doc_id": f"idoc{i}",
                    "image_id": image_id,
                    "file": str(path),
                    "width": 64,
                    "height": 64,
                    "verb": verb,
                    "frames": frames,
                }
            )
            counter += 1
    return records


def build_test_docs(n_docs: int, seed: int, image_dir: Path) -> list[dict]:
    image_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(n_docs):
        rng = np.random.default_rng(stable_seed("testdoc", seed, i))
        doc_id = f"mdoc{i}"
        doc_types = [TYPES[i % 4], TYPES[(i + 1) % 4]]

        sentences, events = [], []
        for s, etype in enumerate(doc_types):
            spec = TYPE_SPECS[etype]
            shared = _shared_trigger_for(etype)
            use_shared = shared is not None and rng.random() < 0.5
            trigger = shared if use_shared else spec["trigger"]
            # One argument word from the training visual subset, one fresh.
            arg_words = [spec["args"][(i + s) % 3], spec["args"][3 + (i + s) % 3]]
            sentence, event = _sentence_record(
                f"m{i}s{s}", etype, trigger, arg_words, rng
            )
            sentences.append(sentence)
            events.append(event)

        images, image_events = [], []
        for s, etype in enumerate(doc_types):
            image_id = f"mimg{i}_{s}"
            tokens = test_tokens(etype)
            path = image_dir / f"{image_id}.bin"
            path.write_bytes(
                render_visual_bytes(tokens, noise_seed=stable_seed("mimg", seed, image_id))
            )
            images.append(
                {"id": image_id, "file": str(path), "width": 64, "height": 64}
            )
            own_words = [w for w in tokens if w in TYPE_SPECS[etype]["args"]]
            image_events.append(
                {
                    "image_id": image_id,
                    "type": etype,
                    "frames": [
                        {
                            "role": _role_of(etype, word),
                            "box": _slot_box(_token_slot(tokens, word)),
                        }
                        for word in own_words
                    ],
                }
            )

        links = [
            {"text_event_idx": k, "image_event_idx": k}
            for k in range(len(doc_types))
        ]
        records.append(
            {
                "doc_id": doc_id,
                "sentences": sentences,
                "images": images,
                "events": events,
                "image_events": image_events,
                "multimedia_links": links,
            }
        )
    return records


def build_scorer_table(test_records: list[dict]) -> list[dict]:
    rows = []
    for record in test_records:
        linked = set()
        for link in record["multimedia_links"]:
            te = record["events"][link["text_event_idx"]]
            ve = record["image_events"][link["image_event_idx"]]
            linked.add((te["trigger"]["sentence_id"], ve["image_id"]))
        for sentence in record["sentences"]:
            for image in record["images"]:
                key = (sentence["id"], image["id"])
                rows.append(
                    {
                        "sentence_id": key[0],
                        "image_id": key[1],
                        "score": 0.85 if key in linked else 0.1,
                    }
                )
    return rows


def build_detector_fixture(test_records: list[dict]) -> list[dict]:
    rows = []
    for record in test_records:
        frames_by_image: dict[str, list] = {img["id"]: [] for img in record["images"]}
        for ev in record["image_events"]:
            frames_by_image[ev["image_id"]].extend(ev["frames"])
        for image_id, frames in frames_by_image.items():
            objects = [
                {"box": f["box"], "label": None, "score": 0.9 - 0.05 * k}
                for k, f in enumerate(frames)
            ]
            objects.append({"box": _slot_box(15), "label": None, "score": 0.6})
            rows.append({"image_id": image_id, "objects": objects})
    return rows


# ---------------------------------------------------------------------------
# corpus assembly


@dataclass(frozen=True)
class SynthPaths:
    root: Path
    ontology: Path
    text_train: Path
    image_train: Path
    multimedia_test: Path
    world: Path
    scorer_table: Path
    detector_fixture: Path
    config: Path


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def build_corpus(
    out_dir: str | Path,
    n_text_docs: int = 25,
    n_image_docs: int = 25,
    n_test_docs: int = 10,
    seed: int = 7,
) -> SynthPaths:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ontology = synth_ontology()
    ontology_path = out_dir / "ontology.json"
    ontology_path.write_text(
        json.dumps(
            {
                "event_types": list(ontology.event_types),
                "roles": {t: list(r) for t, r in ontology.roles_per_event.items()},
                "verb_map": dict(ontology.verb_to_event),
            },
            indent=2,
        ),
        encoding="utf-8",
    )

    text_path = out_dir / "text_train.jsonl"
    _write_jsonl(text_path, build_text_docs(n_text_docs, seed))

    image_path = out_dir / "image_train.jsonl"
    _write_jsonl(image_path, build_image_docs(n_image_docs, seed, out_dir / "images"))

    test_records = build_test_docs(n_test_docs, seed, out_dir / "images")
    test_path = out_dir / "multimedia_test.jsonl"
    _write_jsonl(test_path, test_records)

    world_path = out_dir / "world.json"
    world_path.write_text(
        json.dumps(
            {
                "world": world_map(),
                "caption_vocab": caption_vocab(),
                "common_words": list(FILLERS),
            },
            indent=2,
        ),
        encoding="utf-8",
    )

    scorer_path = out_dir / "scorer_table.jsonl"
    _write_jsonl(scorer_path, build_scorer_table(test_records))

    detector_path = out_dir / "detector_fixture.jsonl"
    _write_jsonl(detector_path, build_detector_fixture(test_records))

    config_path = out_dir / "config.yaml"
    config_path.write_text(toy_config_yaml(seed=seed), encoding="utf-8")

    return SynthPaths(
        root=out_dir,
        ontology=ontology_path,
        text_train=text_path,
        image_train=image_path,
        multimedia_test=test_path,
        world=world_path,
        scorer_table=scorer_path,
        detector_fixture=detector_path,
        config=config_path,
    )


def toy_config_yaml(seed: int = 7) -> str:
    """A ready-to-run config for the synthetic corpus (paths are relative)."""
    return f"""\
run_id: toy
seed: {seed}
runs_dir: runs

data:
  ontology: ontology.json
  text: text_train.jsonl
  image: image_train.jsonl
  test: multimedia_test.jsonl
  strict_verbs: false
  train_ontology: target

model:
  d: 32
  n_heads: 8
  fusion_mode: adapter
  encoder_backend: toy
  patch_size: 16
  canonical_size: 64
  max_text_length: 200

augmentation:
  images_per_event: 4
  image_size: 512
  denoise_steps: 100
  nucleus_p: 0.9
  captions_per_image: 1
  neg_k: 4
  cache_dir: cache

clients:
  generator: fixture
  captioner: fixture
  world_file: world.json

objects:
  detector: fixture
  fixture_file: detector_fixture.jsonl
  max_objects: 20
  score_floor: 0.25

merge:
  threshold: 0.5
  scorer: fixture
  scorer_table: scorer_table.jsonl

optimizer:
  lr: 0.05
  weight_decay: 0.01
  batch_size_visual: 16
  batch_size_text: 10
  grad_clip: 1.0

schedule:
  stage2_repeats: 1
  visual_mention_epochs: 10
  text_mention_epochs: 5
  combined_epochs: 10
"""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate the synthetic corpus.")
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--text-docs", type=int, default=25)
    parser.add_argument("--image-docs", type=int, default=25)
    parser.add_argument("--test-docs", type=int, default=10)
    args = parser.parse_args(argv)
    paths = build_corpus(
        args.out_dir,
        n_text_docs=args.text_docs,
        n_image_docs=args.image_docs,
        n_test_docs=args.test_docs,
        seed=args.seed,
    )
    print(f"synthetic corpus written under {paths.root}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
