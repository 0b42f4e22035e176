"""Inference: decode events from documents with trained checkpoints.

Mention decisions come from the mention checkpoint; the two
argument-specialized checkpoints classify argument roles for their
modality. At inference the fusion context is the document itself: all
image CLS rows for text tasks, all sentence CLS rows for visual tasks.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch

from .coref import MergeConfig, MergeResult, SimilarityScorer, merge_from_scores, score_pairs
from .data_model import (
    ArgumentMention,
    EventMention,
    MultimediaDocument,
    event_from_record,
    event_to_record,
)
from .encoders import to_canonical_box
from .errors import ConfigError
from .fusion import FusionContext
from .heads import decode_class, extract_object_feature
from .model import ModelConfig, MultimediaEventModel
from .objects import ObjectDetectorClient, detect
from .training.checkpoints import load_checkpoint, restore_model


@dataclass
class ModelBundle:
    mention: MultimediaEventModel
    text_argument: MultimediaEventModel
    visual_argument: MultimediaEventModel


def model_from_checkpoint(payload: dict, ontology) -> MultimediaEventModel:
    model_section = payload.get("config", {}).get("model")
    if model_section is None:
        raise ConfigError("checkpoint carries no model config snapshot")
    cfg = ModelConfig(**model_section)
    model = MultimediaEventModel(cfg, ontology)
    restore_model(model, payload)
    model.eval()
    return model


def load_bundle(path: str | Path, ontology) -> ModelBundle:
    """Load a checkpoint bundle dir/file, or one checkpoint for all tasks."""
    path = Path(path)
    if path.is_dir():
        candidate = path / "bundle.json"
        if not candidate.exists():
            candidate = path / "final" / "bundle.json"
        if not candidate.exists():
            raise ConfigError(f"no bundle.json under {path}")
        path = candidate
    if path.suffix == ".json":
        spec = json.loads(path.read_text(encoding="utf-8"))
        cache: dict[str, MultimediaEventModel] = {}

        def _load(p: str) -> MultimediaEventModel:
            if p not in cache:
                cache[p] = model_from_checkpoint(load_checkpoint(p), ontology)
            return cache[p]

        return ModelBundle(
            mention=_load(spec["mention"]),
            text_argument=_load(spec["text_argument"]),
            visual_argument=_load(spec["visual_argument"]),
        )
    model = model_from_checkpoint(load_checkpoint(path), ontology)
    return ModelBundle(mention=model, text_argument=model, visual_argument=model)


def _document_image_context(model, doc) -> Optional[FusionContext]:
    if model.fusion is None:
        return None
    if not doc.images:
        zero = torch.zeros(1, model.cfg.d)
        return FusionContext(keys_values=zero)
    rows = [model.encode_image(img).cls for img in doc.images]
    return FusionContext(
        keys_values=torch.stack(rows), source_ids=tuple(i.id for i in doc.images)
    )


def _document_text_context(model, doc) -> Optional[FusionContext]:
    if model.fusion is None:
        return None
    if not doc.sentences:
        zero = torch.zeros(1, model.cfg.d)
        return FusionContext(keys_values=zero)
    rows = [model.encode_sentence(s).cls for s in doc.sentences]
    return FusionContext(
        keys_values=torch.stack(rows), source_ids=tuple(s.id for s in doc.sentences)
    )


def _class_scores(logits: torch.Tensor, names) -> dict[str, float]:
    probs = torch.softmax(logits.detach(), dim=-1)
    out = {"<null>": float(probs[0])}
    for i, name in enumerate(names):
        out[name] = float(probs[i + 1])
    return out


@torch.no_grad()
def predict_document(
    bundle: ModelBundle,
    doc: MultimediaDocument,
    detector: Optional[ObjectDetectorClient] = None,
    max_objects: int = 20,
    score_floor: float = 0.25,
) -> tuple[list[EventMention], list[EventMention], dict]:
    """Decode textual and visual events (with arguments) for one document."""
    mention = bundle.mention
    labels = mention.labels
    event_scores: dict[int, dict[str, float]] = {}

    text_events: list[EventMention] = []
    img_ctx = _document_image_context(mention, doc)
    arg_img_ctx = _document_image_context(bundle.text_argument, doc)
    for sentence in doc.sentences:
        enc = mention.encode_sentence(sentence)
        h = enc.tokens[list(enc.word_map)]
        if mention.fusion is None:
            x = h
        else:
            x = torch.cat([h, mention.fusion(h, img_ctx, "text-mention")], dim=-1)
        logits = mention.heads.head("text-mention")(x)
        arg_model = bundle.text_argument
        arg_enc = arg_model.encode_sentence(sentence)
        for w in range(min(len(sentence.words), h.shape[0])):
            cls_idx = decode_class(logits[w])
            if cls_idx == 0:
                continue
            etype = labels.type_name(cls_idx)
            args = []
            h_trig = arg_enc.tokens[arg_enc.word_map[w]]
            for ent in sentence.entities:
                h_ent = arg_enc.tokens[arg_enc.word_map[ent.start]]
                if arg_model.fusion is None:
                    xa = torch.cat([h_ent, h_trig])
                else:
                    g = arg_model.fusion(h_ent, arg_img_ctx, "text-argument")
                    xa = torch.cat([h_ent, g, h_trig])
                role_idx = decode_class(arg_model.heads.head("text-argument")(xa))
                if role_idx == 0:
                    continue
                args.append(
                    ArgumentMention(
                        role=arg_model.labels.role_name(role_idx),
                        text_grounding=(sentence.id, ent.start, ent.end),
                    )
                )
            event_scores[len(text_events)] = _class_scores(logits[w], labels.event_types)
            text_events.append(
                EventMention(
                    event_type=etype,
                    text_trigger=(sentence.id, w),
                    arguments=tuple(args),
                )
            )

    visual_events: list[EventMention] = []
    visual_scores: dict[int, dict[str, float]] = {}
    txt_ctx = _document_text_context(mention, doc)
    arg_txt_ctx = _document_text_context(bundle.visual_argument, doc)
    for image in doc.images:
        enc = mention.encode_image(image)
        if mention.fusion is None:
            x = enc.cls
        else:
            x = torch.cat([enc.cls, mention.fusion(enc.cls, txt_ctx, "visual-mention")])
        logits = mention.heads.head("visual-mention")(x)
        cls_idx = decode_class(logits)
        if cls_idx == 0:
            continue
        etype = labels.type_name(cls_idx)
        args = []
        if detector is not None:
            arg_model = bundle.visual_argument
            arg_enc = arg_model.encode_image(image)
            proposals = detect(
                image, detector, max_objects=max_objects, score_floor=score_floor
            )
            for box in proposals:
                canon = to_canonical_box(
                    box, image.width, image.height, arg_model.cfg.canonical_size
                )
                obj = extract_object_feature(canon, arg_enc, arg_model.cfg.canonical_size)
                if arg_model.fusion is None:
                    xa = torch.cat([obj.vector, arg_enc.cls])
                else:
                    g = arg_model.fusion(obj.vector, arg_txt_ctx, "visual-argument")
                    xa = torch.cat([obj.vector, g, arg_enc.cls])
                role_idx = decode_class(arg_model.heads.head("visual-argument")(xa))
                if role_idx == 0:
                    continue
                args.append(
                    ArgumentMention(
                        role=arg_model.labels.role_name(role_idx),
                        visual_grounding=((image.id, box),),
                    )
                )
        visual_scores[len(visual_events)] = _class_scores(logits, labels.event_types)
        visual_events.append(
            EventMention(event_type=etype, image_trigger=image.id, arguments=tuple(args))
        )

    scores = {
        "text": event_scores,
        "visual": visual_scores,
    }
    return text_events, visual_events, scores


def prediction_record(
    doc: MultimediaDocument,
    text_events: list[EventMention],
    visual_events: list[EventMention],
    merge: MergeResult,
    scores: dict,
) -> dict:
    return {
        "doc_id": doc.id,
        "text_events": [
            {**event_to_record(e), "scores": scores["text"].get(i, {})}
            for i, e in enumerate(text_events)
        ],
        "visual_events": [
            {**event_to_record(e), "scores": scores["visual"].get(i, {})}
            for i, e in enumerate(visual_events)
        ],
        "multimedia_events": [event_to_record(e) for e in merge.multimedia],
        "pair_scores": [
            {"sentence_id": sid, "image_id": iid, "score": score}
            for (sid, iid), score in sorted(merge.pair_scores.items())
        ],
    }


def predict_documents(
    bundle: ModelBundle,
    docs: list[MultimediaDocument],
    scorer: SimilarityScorer,
    merge_cfg: MergeConfig,
    detector: Optional[ObjectDetectorClient] = None,
    max_objects: int = 20,
    score_floor: float = 0.25,
) -> list[dict]:
    records = []
    for doc in docs:
        text_events, visual_events, scores = predict_document(
            bundle, doc, detector=detector,
            max_objects=max_objects, score_floor=score_floor,
        )
        pair_scores = score_pairs(text_events, visual_events, doc, scorer)
        merged = merge_from_scores(text_events, visual_events, pair_scores, merge_cfg)
        records.append(prediction_record(doc, text_events, visual_events, merged, scores))
    return records


def attach_generated_context(
    text_docs: list[MultimediaDocument],
    image_docs: list[MultimediaDocument],
    pool,
    neg_k: int,
    seed: int,
    canonical_size: int,
) -> list[MultimediaDocument]:
    """Materialize training contexts as document content.

    Text documents get their generated (positive + negative) images
    attached as pseudo images; image documents get their generated
    captions attached as pseudo sentences. Predicting on the result mirrors
    what the model saw during training, which is how training-set
    performance is measured.
    """
    from dataclasses import replace

    from .augmentation.batches import assemble_text_batch
    from .data_model import ImageDoc as _ImageDoc
    from .data_model import Sentence as _Sentence

    out = []
    for doc in text_docs:
        images = []
        seen = set()
        for sentence in doc.sentences:
            ctx = assemble_text_batch(doc, sentence, pool, neg_k, seed)
            for path in ctx.positives + ctx.negatives:
                if path in seen:
                    continue
                seen.add(path)
                images.append(
                    _ImageDoc(id=path, source=path,
                              width=canonical_size, height=canonical_size)
                )
        out.append(replace(doc, images=tuple(images)))
    for doc in image_docs:
        sentences = []
        for image in doc.images:
            captions = pool.captions_by_image.get(image.id)
            if not captions:
                continue
            words = tuple(captions[0].split()) or ("<none>",)
            sentences.append(_Sentence(id=f"caption:{image.id}", words=words))
        out.append(replace(doc, sentences=tuple(sentences)))
    return out


def events_from_prediction(record: dict, threshold: Optional[float] = None,
                           merge_cfg: Optional[MergeConfig] = None) -> list[EventMention]:
    """Reconstruct the event list of one prediction record.

    With a threshold (or merge config), coreference is re-derived from the
    record's stored pair scores; otherwise the stored multimedia split is
    used as-is.
    """
    text_events = [event_from_record(e) for e in record.get("text_events", ())]
    visual_events = [event_from_record(e) for e in record.get("visual_events", ())]
    if threshold is None and merge_cfg is None:
        multimedia = [event_from_record(e) for e in record.get("multimedia_events", ())]
        merged_text = {
            (e.text_trigger, e.event_type) for e in multimedia
        }
        merged_visual = {
            (e.image_trigger, e.event_type) for e in multimedia
        }
        residual_text = [
            e for e in text_events
            if (e.text_trigger, e.event_type) not in merged_text
        ]
        residual_visual = [
            e for e in visual_events
            if (e.image_trigger, e.event_type) not in merged_visual
        ]
        return multimedia + residual_text + residual_visual
    cfg = merge_cfg or MergeConfig(threshold=threshold)
    pair_scores = {
        (p["sentence_id"], p["image_id"]): p["score"]
        for p in record.get("pair_scores", ())
    }
    result = merge_from_scores(text_events, visual_events, pair_scores, cfg)
    return list(result.all_events)
