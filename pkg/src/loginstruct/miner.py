"""Mining log instructions from source code into severity-labelled samples.

Extraction is pattern based: each language profile knows the usual call
shapes (``logger.info(...)``, ``LOG.error(...)``, ``spdlog::warn(...)``,
``LOG(ERROR) << ...``) and a tiny lexer pulls the string literals out of the
message argument. This is best effort; unusual call shapes are just missed.
"""

from __future__ import annotations

import enum
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .preprocess import normalize_text, strip_placeholders


class LanguageProfile(str, enum.Enum):
    PYTHON = "python"
    JAVA = "java"
    CPP = "cpp"


class SeverityGroup(str, enum.Enum):
    NORMAL = "normal"
    ABNORMAL = "abnormal"


EXTENSION_PROFILES = {
    ".py": LanguageProfile.PYTHON,
    ".java": LanguageProfile.JAVA,
    ".cpp": LanguageProfile.CPP,
    ".cc": LanguageProfile.CPP,
    ".hpp": LanguageProfile.CPP,
    ".h": LanguageProfile.CPP,
}

LEVEL_ALIASES = {
    "err": "error",
    "exception": "error",  # python logger.exception logs at ERROR
    "severe": "error",  # java.util.logging
    "crit": "critical",
}

_SEVERITY = {
    "info": SeverityGroup.NORMAL,
    "error": SeverityGroup.ABNORMAL,
    "fatal": SeverityGroup.ABNORMAL,
    "critical": SeverityGroup.ABNORMAL,
}

_LEVELS = (
    "trace|debug|info|information|notice|warn|warning|error|err|exception"
    "|fatal|critical|crit|severe|fine|finer|finest|config|alert|emerg"
)

# receiver.level(  -- receiver's last segment must mention "log"
_METHOD_CALL = re.compile(
    r"(?P<recv>\b[A-Za-z_][\w]*(?:(?:\.|->|::)[A-Za-z_]\w*)*)\s*(?:\.|->|::)\s*"
    r"(?P<level>" + _LEVELS + r")\s*\(",
    re.IGNORECASE,
)
_CPP_MACRO_CALL = re.compile(
    r"\b(?:SPDLOG|LOG4CXX|LOG4CPLUS|LOGGER|LOG)_(?P<level>" + _LEVELS + r")\s*\(",
    re.IGNORECASE,
)
_CPP_STREAM = re.compile(
    r"\b(?:LOG|BOOST_LOG_TRIVIAL|BOOST_LOG_SEV|VLOG_IF|LOG_IF)\s*\(\s*(?:[\w:]*::)?(?P<level>"
    + _LEVELS
    + r")\s*\)\s*<<",
    re.IGNORECASE,
)

_PY_STRING_START = re.compile(r"([rRbBuUfF]{0,2})('''|\"\"\"|'|\")")
_ESCAPES = {"n": " ", "t": " ", "r": " ", "0": " "}


@dataclass(frozen=True)
class RawInstruction:
    static_text: str
    level_name: str
    source_locator: str
    language_profile: LanguageProfile

    def __post_init__(self) -> None:
        if not self.static_text.strip():
            raise ValueError("static_text must be non-empty")
        object.__setattr__(self, "level_name", self.level_name.lower())
        object.__setattr__(self, "language_profile", LanguageProfile(self.language_profile))


@dataclass(frozen=True)
class SLSample:
    tokens: tuple[str, ...]
    group: SeverityGroup
    source_locator: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "group", SeverityGroup(self.group))

    @property
    def label(self) -> int:
        return 1 if self.group is SeverityGroup.ABNORMAL else 0

    def to_record(self) -> dict:
        return {"tokens": list(self.tokens), "group": self.group.value, "source": self.source_locator}

    @classmethod
    def from_record(cls, rec: dict) -> "SLSample":
        return cls(tuple(rec["tokens"]), SeverityGroup(rec["group"]), rec.get("source", ""))


def map_severity(level_name: str) -> SeverityGroup | None:
    level = level_name.lower()
    return _SEVERITY.get(LEVEL_ALIASES.get(level, level))


def _decode_escapes(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            out.append(_ESCAPES.get(nxt, nxt))
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def _read_literal(src: str, pos: int, profile: LanguageProfile) -> tuple[str, int] | None:
    """Try to read a string literal at ``pos``; return (content, end) or None."""
    if profile is LanguageProfile.PYTHON:
        m = _PY_STRING_START.match(src, pos)
        if not m:
            return None
        prefix, quote = m.groups()
        raw = "r" in prefix.lower()
        i = m.end()
        buf_start = i
        while i < len(src):
            if not raw and src[i] == "\\":
                i += 2
                continue
            if src.startswith(quote, i):
                body = src[buf_start:i]
                return (body if raw else _decode_escapes(body)), i + len(quote)
            if len(quote) == 1 and src[i] == "\n":
                return None
            i += 1
        return None
    if src[pos] not in "\"'":
        return None
    quote = src[pos]
    i = pos + 1
    while i < len(src):
        if src[i] == "\\":
            i += 2
            continue
        if src[i] == quote:
            body = src[pos + 1 : i]
            # char literals carry no message text
            return (_decode_escapes(body) if quote == '"' else ""), i + 1
        if src[i] == "\n":
            return None
        i += 1
    return None


def _skip_comment(src: str, pos: int, profile: LanguageProfile) -> int:
    if profile is LanguageProfile.PYTHON:
        if src[pos] == "#":
            end = src.find("\n", pos)
            return len(src) if end < 0 else end
        return pos
    if src.startswith("//", pos):
        end = src.find("\n", pos)
        return len(src) if end < 0 else end
    if src.startswith("/*", pos):
        end = src.find("*/", pos + 2)
        return len(src) if end < 0 else end + 2
    return pos


def _collect_literals(src: str, pos: int, profile: LanguageProfile, stream: bool) -> list[str]:
    """Collect string literals of the message argument starting at ``pos``.

    For call syntax ``pos`` is just after the opening parenthesis and
    scanning stops at the first top-level comma or the closing parenthesis.
    For stream syntax scanning stops at the terminating semicolon.
    """
    literals: list[str] = []
    depth = 0
    i = pos
    while i < len(src):
        skipped = _skip_comment(src, i, profile)
        if skipped != i:
            i = skipped
            continue
        lit = _read_literal(src, i, profile)
        if lit is not None:
            text, i = lit
            if text:
                literals.append(text)
            continue
        ch = src[i]
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            if depth == 0:
                if stream:
                    return literals
                break
            depth -= 1
        elif ch == "," and depth == 0 and not stream:
            break
        elif ch == ";" and stream:
            break
        i += 1
    return literals


def _is_logger_receiver(receiver: str) -> bool:
    last = re.split(r"\.|->|::", receiver)[-1]
    return "log" in last.lower()


def _line_of(src: str, pos: int) -> int:
    return src.count("\n", 0, pos) + 1


def extract_instructions(
    source_text: str, profile: LanguageProfile | str, path: str = "<memory>"
) -> list[RawInstruction]:
    """Return the log instructions found in one source file, in file order."""
    profile = LanguageProfile(profile)
    found: list[tuple[int, RawInstruction]] = []
    seen: set[int] = set()

    def add(start: int, level: str, literals: list[str]) -> None:
        text = " ".join(s.strip() for s in literals if s.strip())
        if not text or start in seen:
            return
        seen.add(start)
        loc = f"{path}:{_line_of(source_text, start)}"
        found.append((start, RawInstruction(text, level, loc, profile)))

    for m in _METHOD_CALL.finditer(source_text):
        if not _is_logger_receiver(m.group("recv")):
            continue
        add(m.start(), m.group("level"), _collect_literals(source_text, m.end(), profile, stream=False))

    if profile is LanguageProfile.CPP:
        for m in _CPP_MACRO_CALL.finditer(source_text):
            add(m.start(), m.group("level"), _collect_literals(source_text, m.end(), profile, stream=False))
        for m in _CPP_STREAM.finditer(source_text):
            add(m.start(), m.group("level"), _collect_literals(source_text, m.end(), profile, stream=True))

    found.sort(key=lambda item: item[0])
    return [inst for _, inst in found]


def build_sl_dataset(instructions: Iterable[RawInstruction]) -> list[SLSample]:
    """Keep info/error/fatal/critical instructions and normalize their text."""
    samples = []
    for inst in instructions:
        group = map_severity(inst.level_name)
        if group is None:
            continue
        tokens = normalize_text(strip_placeholders(inst.static_text))
        if tokens:
            samples.append(SLSample(tuple(tokens), group, inst.source_locator))
    return samples


def iter_source_files(root: str | os.PathLike) -> Iterator[tuple[Path, LanguageProfile]]:
    """Yield recognised source files under ``root`` in sorted path order."""
    root = Path(root)
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        profile = EXTENSION_PROFILES.get(path.suffix.lower())
        if profile is not None:
            yield path, profile


def mine_directory(root: str | os.PathLike) -> list[RawInstruction]:
    root = Path(root)
    instructions: list[RawInstruction] = []
    for path, profile in iter_source_files(root):
        text = path.read_text(encoding="utf-8", errors="replace")
        rel = path.relative_to(root).as_posix()
        instructions.extend(extract_instructions(text, profile, rel))
    return instructions


def write_sl_jsonl(samples: Iterable[SLSample], path: str | os.PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            fh.write(json.dumps(sample.to_record(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_sl_jsonl(path: str | os.PathLike) -> list[SLSample]:
    with open(path, encoding="utf-8") as fh:
        return [SLSample.from_record(json.loads(line)) for line in fh if line.strip()]
