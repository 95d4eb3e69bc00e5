"""Chat logs, synthetic conversations and sliding-window graph extraction."""
from __future__ import annotations

import json
import os
import re
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .graph import ConvGraph, EdgeData, build_graph

ABUSIVE = "Abusive"
NON_ABUSIVE = "NonAbusive"
LABELS = (ABUSIVE, NON_ABUSIVE)
LEXICON_ENV = "ABUSEGRAPH_LEXICON_DIR"

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class ChatLogError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    author: str
    position: int
    text: str = ""
    flagged: bool = False


@dataclass(frozen=True)
class Conversation:
    id: str
    messages: tuple[Message, ...]
    label: str
    target_index: int

    def __post_init__(self):
        if self.label not in LABELS:
            raise ChatLogError(f"conversation {self.id}: unknown label {self.label!r}")
        if not 0 <= self.target_index < len(self.messages):
            raise ChatLogError(f"conversation {self.id}: target index out of range")
        flagged = [i for i, m in enumerate(self.messages) if m.flagged]
        if flagged != [self.target_index]:
            raise ChatLogError(
                f"conversation {self.id}: expected exactly one flagged message, found {len(flagged)}"
            )
        pos = [m.position for m in self.messages]
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ChatLogError(f"conversation {self.id}: positions must be strictly increasing")

    @property
    def target(self) -> Message:
        return self.messages[self.target_index]


@dataclass(frozen=True)
class ExtractionConfig:
    context_size: int = 250
    window_size: int = 10
    scope: str = "Full"  # Full | Before | After
    signed: bool = True

    def __post_init__(self):
        if self.window_size < 2:
            raise ValueError("window_size must be >= 2")
        if self.context_size < 1:
            raise ValueError("context_size must be >= 1")
        if self.scope not in ("Full", "Before", "After"):
            raise ValueError(f"unknown scope {self.scope!r}")


# -- sentiment ---------------------------------------------------------------

def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _read_words(path) -> frozenset[str]:
    words = (w.strip().lower() for w in Path(path).read_text(encoding="utf-8").splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


@dataclass(frozen=True)
class Lexicon:
    positive: frozenset[str]
    negative: frozenset[str]

    @classmethod
    def load(cls, directory: str | os.PathLike | None = None) -> "Lexicon":
        """Read ``positive.txt`` / ``negative.txt``.

        Lookup order: explicit directory, then ``$ABUSEGRAPH_LEXICON_DIR``,
        then the small lexicon bundled with the package.
        """
        directory = directory or os.environ.get(LEXICON_ENV)
        if directory:
            d = Path(directory)
            return cls(_read_words(d / "positive.txt"), _read_words(d / "negative.txt"))
        pkg = resources.files("abusegraph") / "data"
        return cls(_read_words(pkg / "positive.txt"), _read_words(pkg / "negative.txt"))


class LexiconScorer:
    """Polarity in [-1, 1]: (#positive - #negative) / max(1, #lexicon tokens)."""

    def __init__(self, lexicon: Lexicon | None = None):
        self.lexicon = lexicon or Lexicon.load()

    def __call__(self, text: str) -> float:
        pos = neg = 0
        for tok in tokenize(text):
            if tok in self.lexicon.positive:
                pos += 1
            elif tok in self.lexicon.negative:
                neg += 1
        return (pos - neg) / max(1, pos + neg)


SentimentScorer = Callable[[str], float]
SIGN_TIE_TOL = 1e-9  # polarities like 1/3 do not sum to an exact 0 in floats
_default_scorer: LexiconScorer | None = None


def score_sentiment(text: str) -> float:
    global _default_scorer
    if _default_scorer is None:
        _default_scorer = LexiconScorer()
    return _default_scorer(text)


# -- chat log parsing --------------------------------------------------------

def parse_chat_log(stream: Iterable[str]) -> list[Conversation]:
    """Parse JSON-lines records into conversations (grouped by ``conv_id``).

    Conversations are returned in order of first appearance, messages sorted
    by position.
    """
    rows: dict[str, list[tuple[int, Message, str | None]]] = defaultdict(list)
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            conv_id = str(rec["conv_id"])
            flagged = int(rec.get("flagged", 0))
            if flagged not in (0, 1):
                raise ValueError("flagged must be 0 or 1")
            msg = Message(
                author=str(rec["author"]),
                position=int(rec["position"]),
                text=str(rec.get("text", "")),
                flagged=bool(flagged),
            )
            label = rec.get("label") if flagged else None
        except (ValueError, KeyError, TypeError) as exc:
            raise ChatLogError(f"line {lineno}: malformed record ({exc})") from exc
        rows[conv_id].append((lineno, msg, label))

    convs = []
    for conv_id, items in rows.items():
        items.sort(key=lambda it: it[1].position)
        flagged = [(ln, i, lab) for i, (ln, m, lab) in enumerate(items) if m.flagged]
        if len(flagged) != 1:
            lines = ", ".join(str(ln) for ln, _, _ in flagged) or "none"
            raise ChatLogError(
                f"conversation {conv_id}: expected exactly one flagged message, "
                f"found {len(flagged)} (lines: {lines})"
            )
        ln, idx, label = flagged[0]
        if label not in LABELS:
            raise ChatLogError(f"line {ln}: label must be one of {LABELS}, got {label!r}")
        messages = tuple(m for _, m, _ in items)
        try:
            convs.append(Conversation(conv_id, messages, label, idx))
        except ChatLogError as exc:
            raise ChatLogError(f"{exc} (first line {items[0][0]})") from exc
    return convs


def write_chat_log(convs: Iterable[Conversation], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for conv in convs:
            for m in conv.messages:
                rec = {
                    "conv_id": conv.id,
                    "position": m.position,
                    "author": m.author,
                    "text": m.text,
                    "flagged": int(m.flagged),
                }
                if m.flagged:
                    rec["label"] = conv.label
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_chat_log(path: str | os.PathLike) -> list[Conversation]:
    with open(path, encoding="utf-8") as fh:
        return parse_chat_log(fh)


# -- graph extraction --------------------------------------------------------

def context_slice(conv: Conversation, cfg: ExtractionConfig) -> tuple[Message, ...]:
    t, c = conv.target_index, cfg.context_size
    lo = max(0, t - c) if cfg.scope in ("Full", "Before") else t
    hi = t + c + 1 if cfg.scope in ("Full", "After") else t + 1
    return conv.messages[lo:hi]


def window_multiplicity(i: int, j: int, length: int, window: int) -> int:
    """Number of sliding windows (step 1) containing both positions i < j."""
    if length <= window:
        return 1
    lo = max(0, j - window + 1)
    hi = min(i, length - window)
    return max(0, hi - lo + 1)


def extract_graph(
    conv: Conversation,
    cfg: ExtractionConfig = ExtractionConfig(),
    scorer: SentimentScorer | None = None,
) -> ConvGraph:
    """Build the conversational graph of ``conv``.

    Each message points at every distinct earlier message of another author
    sharing a window with it; every shared window adds one to the edge weight
    and the reply's polarity to the edge's evidence. The final sign is the sign
    of the summed evidence; ties, up to float round-off, count as positive.
    """
    msgs = context_slice(conv, cfg)
    ids: dict[str, int] = {}
    for m in msgs:
        ids.setdefault(m.author, len(ids))
    if cfg.signed:
        scorer = scorer or score_sentiment
        polarity = [float(scorer(m.text)) for m in msgs]
    else:
        polarity = [0.0] * len(msgs)

    weight: dict[tuple[int, int], int] = defaultdict(int)
    evidence: dict[tuple[int, int], float] = defaultdict(float)
    n, w = len(msgs), cfg.window_size
    for j in range(n):
        a = ids[msgs[j].author]
        for i in range(max(0, j - w + 1), j):
            b = ids[msgs[i].author]
            if a == b:
                continue
            k = window_multiplicity(i, j, n, w)
            if k:
                weight[a, b] += k
                evidence[a, b] += k * polarity[j]

    edges = {
        key: EdgeData(wt, 1 if (not cfg.signed or evidence[key] > -SIGN_TIE_TOL) else -1)
        for key, wt in weight.items()
    }
    target = ids[conv.target.author]
    authors = {v: a for a, v in ids.items()}
    return build_graph(conv.id, edges, target, authors=authors, vertices=ids.values())


# -- synthetic corpus ----------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic annotated-conversation generator.

    Participants are active during limited sessions, so only a few of them
    talk at any moment. Around the flagged message its author and a few
    partners exchange a burst of messages; in abusive conversations the
    flagged author posts more, is answered more, and the burst is hostile.
    Defaults give the 655:1890 class ratio; ``scaled`` keeps it for smaller
    corpora.
    """

    n_abusive: int = 655
    n_non_abusive: int = 1890
    mean_conversation_length: int = 553
    sd_conversation_length: float = 127.0
    mean_participants: float = 70.0
    sd_participants: float = 20.0
    n_regulars: int = 0  # participants active over the whole conversation
    session_fraction: float = 0.02  # mean session length relative to conversation length
    author_pool: int = 4000
    reply_prob: float = 0.7
    burst_halfwidth: int = 50
    burst_size: int = 4
    burst_rate: float = 0.6  # share of burst messages written by the target or a partner
    fan_in: float = 2.0  # target's weight relative to one partner inside abusive bursts
    negative_interaction_prob: float = 1.0  # probability that an abusive burst is hostile
    insult_rate: float = 0.35  # negative-token rate of the flagged author in hostile bursts
    reply_insult_rate: float = 0.0  # negative-token rate of the partners answering them
    argument_prob: float = 0.5  # probability that a non-abusive burst is a two-sided argument
    argument_rate: float = 0.2  # negative-token rate of everyone in an argument
    friendly_rate: float = 0.2  # positive-token rate in friendly bursts
    base_negative_rate: float = 0.002
    base_positive_rate: float = 0.04
    words_per_message: float = 12.0
    seed: int = 0

    def __post_init__(self):
        if self.n_abusive < 0 or self.n_non_abusive < 0 or self.n_abusive + self.n_non_abusive < 1:
            raise ValueError("need at least one conversation")
        for name in ("reply_prob", "burst_rate", "negative_interaction_prob", "insult_rate",
                     "reply_insult_rate", "argument_prob", "argument_rate", "friendly_rate", "base_negative_rate", "base_positive_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.fan_in <= 0:
            raise ValueError("fan_in must be positive")

    @classmethod
    def scaled(cls, total: int, **kw) -> "SynthConfig":
        n_abusive = round(total * 655 / 2545)
        return cls(n_abusive=n_abusive, n_non_abusive=total - n_abusive, **kw)


_NEUTRAL = tuple(
    "the a to and of fleet planet attack base ship we you they is are on for with at "
    "this that ok yes no maybe later tonight alliance trade metal crystal fuel war "
    "defense moon colony tech research build send need have got will can just now "
    "who what where when how lol hey hi bye so".split()
)


def _make_text(rng: np.random.Generator, n_words: int, pos_rate: float, neg_rate: float,
               pos_words, neg_words) -> str:
    r = rng.random(n_words)
    picks = rng.integers(0, 1 << 30, size=n_words)
    words = [
        neg_words[p % len(neg_words)] if x < neg_rate
        else pos_words[p % len(pos_words)] if x < neg_rate + pos_rate
        else _NEUTRAL[p % len(_NEUTRAL)]
        for x, p in zip(r, picks)
    ]
    if rng.random() < 0.15:
        words[0] = words[0].upper()
    return " ".join(words)


def _synth_conversation(rng, conv_id: str, abusive: bool, cfg: SynthConfig,
                        pos_words, neg_words) -> Conversation:
    length = int(np.clip(round(rng.normal(cfg.mean_conversation_length,
                                          cfg.sd_conversation_length)), 12, 2400))
    n_part = int(np.clip(round(rng.normal(cfg.mean_participants, cfg.sd_participants)), 3, 250))
    people = rng.choice(cfg.author_pool, size=n_part, replace=False)
    activity = rng.lognormal(0.0, 0.7, size=n_part)
    target_idx = int(rng.integers(length // 3, max(length // 3 + 1, 2 * length // 3)))

    # sessions: [start, end) of activity for each participant
    span = rng.exponential(cfg.session_fraction * length, size=n_part) + 10
    start = rng.uniform(-span / 2, length - span / 2)
    end = start + span
    start[: cfg.n_regulars], end[: cfg.n_regulars] = -1, length + 1
    target = int(rng.integers(n_part))
    start[target] = min(start[target], target_idx - cfg.burst_halfwidth)
    end[target] = max(end[target], target_idx + cfg.burst_halfwidth + 1)

    lo, hi = target_idx - cfg.burst_halfwidth, target_idx + cfg.burst_halfwidth
    around = np.flatnonzero((start < hi) & (end > lo))
    around = around[around != target]
    if len(around) == 0:
        around = np.array([p for p in range(n_part) if p != target], dtype=int)
    k = min(cfg.burst_size, len(around))
    partners = [int(p) for p in rng.choice(around, size=k, replace=False)] if k else []
    hostile = abusive and rng.random() < cfg.negative_interaction_prob
    argument = not abusive and rng.random() < cfg.argument_prob
    burst_people = (target, *partners)
    if abusive:
        burst_w = np.array([cfg.fan_in] + [1.0] * k)
    else:
        burst_w = np.ones(k + 1)
    burst_w /= burst_w.sum()

    authors: list[int] = []
    texts: list[str] = []
    for pos in range(length):
        in_burst = bool(partners) and lo <= pos <= hi
        if pos == target_idx:
            a = target
        elif in_burst and rng.random() < cfg.burst_rate:
            a = burst_people[int(rng.choice(k + 1, p=burst_w))]
        elif authors and rng.random() < cfg.reply_prob:
            recent = list(dict.fromkeys(reversed(authors[-6:])))
            a = recent[min(len(recent) - 1, int(rng.geometric(0.6)) - 1)]
        else:
            active = np.flatnonzero((start <= pos) & (end > pos))
            if len(active) == 0:
                active = np.array([int(np.argmin(np.abs((start + end) / 2 - pos)))])
            w = activity[active]
            a = int(active[rng.choice(len(active), p=w / w.sum())])
        n_words = max(1, int(rng.poisson(cfg.words_per_message)))
        if hostile and a == target:
            text = _make_text(rng, n_words, 0.0, cfg.insult_rate, pos_words, neg_words)
        elif in_burst and a in burst_people:
            if hostile:
                text = _make_text(rng, n_words, 0.0, cfg.reply_insult_rate, pos_words, neg_words)
            elif argument:
                text = _make_text(rng, n_words, 0.0, cfg.argument_rate, pos_words, neg_words)
            else:
                text = _make_text(rng, n_words, cfg.friendly_rate, cfg.base_negative_rate,
                                  pos_words, neg_words)
        else:
            text = _make_text(rng, n_words, cfg.base_positive_rate, cfg.base_negative_rate,
                              pos_words, neg_words)
        authors.append(a)
        texts.append(text)

    messages = tuple(
        Message(author=f"u{int(people[a]):05d}", position=pos, text=texts[pos],
                flagged=(pos == target_idx))
        for pos, a in enumerate(authors)
    )
    return Conversation(conv_id, messages, ABUSIVE if abusive else NON_ABUSIVE, target_idx)


def generate_synthetic_corpus(cfg: SynthConfig = SynthConfig(),
                              lexicon: Lexicon | None = None) -> list[Conversation]:
    """Deterministic synthetic corpus; classes interleaved in a seeded order."""
    lex = lexicon or Lexicon.load()
    pos_words, neg_words = sorted(lex.positive), sorted(lex.negative)
    rng = np.random.default_rng(cfg.seed)
    labels = np.array([True] * cfg.n_abusive + [False] * cfg.n_non_abusive)
    rng.shuffle(labels)
    width = len(str(len(labels)))
    return [
        _synth_conversation(rng, f"c{i:0{width}d}", bool(ab), cfg, pos_words, neg_words)
        for i, ab in enumerate(labels)
    ]
