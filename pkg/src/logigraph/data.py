"""Sample schema, JSONL ingestion, and input-sequence assembly.

A sample is one QA or dialogue instance.  The model input for candidate c
is the concatenation ``<s> passage </s> question ‖ option </s>`` (QA) or
``<s> dialogue </s> response`` (dialogue); the boundary M is the index of
the first token after the first ``</s>``.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .segmentation import tokenize

BOS = "<s>"
EOS = "</s>"
SEP = "‖"
UNK = "<unk>"
PAD = "<pad>"


@dataclass(frozen=True)
class Sample:
    id: str
    mode: str  # "qa" | "dialogue"
    context: str
    question: str | None
    options: tuple[str, ...]
    label: int

    def __post_init__(self):
        if self.mode not in ("qa", "dialogue"):
            raise DataError(f"sample {self.id}: unknown mode {self.mode!r}")
        if self.mode == "qa" and self.question is None:
            raise DataError(f"sample {self.id}: qa mode requires a question")
        if self.mode == "dialogue" and self.question is not None:
            raise DataError(f"sample {self.id}: dialogue mode takes no question")
        if not self.options:
            raise DataError(f"sample {self.id}: no options")
        if not (0 <= self.label < len(self.options)):
            raise DataError(
                f"sample {self.id}: label {self.label} out of range for "
                f"{len(self.options)} options"
            )

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "mode": self.mode,
            "context": self.context,
            "options": list(self.options),
            "label": self.label,
        }
        if self.question is not None:
            d["question"] = self.question
        return d

    @staticmethod
    def from_dict(d: dict) -> "Sample":
        try:
            return Sample(
                id=str(d["id"]),
                mode=d.get("mode", "qa"),
                context=d["context"],
                question=d.get("question"),
                options=tuple(d["options"]),
                label=int(d["label"]),
            )
        except KeyError as e:
            raise DataError(f"sample record missing field {e.args[0]!r}") from e


def read_jsonl(path: str | Path) -> list[Sample]:
    samples = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: line {lineno}: invalid JSON ({e.msg})") from e
        try:
            samples.append(Sample.from_dict(record))
        except DataError as e:
            raise DataError(f"{path}: line {lineno}: {e}") from e
    if not samples:
        raise DataError(f"{path}: no samples")
    return samples


def write_jsonl(samples, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")


def assemble_input(sample: Sample, c: int, max_len: int = 256) -> tuple[list[str], int]:
    """Token sequence (with special markers) and boundary M for candidate c.

    Truncation to ``max_len`` trims the context first, then the candidate
    tail, always keeping one context token and the final ``</s>`` of QA
    inputs.  M is the index of the first token after the first ``</s>``.
    """
    if not (0 <= c < len(sample.options)):
        raise DataError(f"sample {sample.id}: candidate index {c} out of range")
    ctx = tokenize(sample.context)
    opt = tokenize(sample.options[c])
    if not ctx:
        raise DataError(f"sample {sample.id}: empty context text")
    if sample.mode == "qa":
        q = tokenize(sample.question)
        cand = q + [SEP] + opt
        tail_close = [EOS]
    else:
        cand = opt
        tail_close = []
    if not opt:
        raise DataError(f"sample {sample.id}: empty option {c}")

    overhead = 2 + len(cand) + len(tail_close)  # <s> ... </s> cand [</s>]
    if overhead + len(ctx) > max_len:
        keep = max(1, max_len - overhead)
        ctx = ctx[:keep]
    tokens = [BOS] + ctx + [EOS] + cand + tail_close
    if len(tokens) > max_len:
        tokens = tokens[: max_len - len(tail_close)] + tail_close
    m = tokens.index(EOS) + 1
    return tokens, m
