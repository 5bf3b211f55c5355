"""Prompt templates and lenient parsing of structured LLM replies."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any

import jinja2

TEMPLATE_DIR = Path(__file__).with_name("templates")


class PromptLibrary:
    """Renders ``{{name}}`` templates; files in ``override_dir`` shadow the shipped ones."""

    def __init__(self, override_dir: str | Path | None = None):
        loaders: list[jinja2.BaseLoader] = []
        if override_dir is not None:
            loaders.append(jinja2.FileSystemLoader(str(override_dir)))
        loaders.append(jinja2.FileSystemLoader(str(TEMPLATE_DIR)))
        self._env = jinja2.Environment(
            loader=jinja2.ChoiceLoader(loaders),
            undefined=jinja2.StrictUndefined,
            keep_trailing_newline=True,
            autoescape=False,
        )

    def render(self, name: str, **values: Any) -> str:
        return self._env.get_template(f"{name}.txt").render(**values).strip() + "\n"


DEFAULT_PROMPTS = PromptLibrary()


def truncate(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    return text[:limit] + f"\n... [{len(text) - limit} characters truncated]"


_FENCE = re.compile(r"```[a-zA-Z]*\s*\n(.*?)```", re.DOTALL)


def parse_json_block(text: str, expect: type) -> Any:
    """Pull a JSON list or object out of a reply; ``None`` when nothing parses."""
    opener, closer = ("[", "]") if expect is list else ("{", "}")
    chunks = [m.group(1) for m in _FENCE.finditer(text)] + [text]
    for chunk in chunks:
        chunk = chunk.strip()
        start, end = chunk.find(opener), chunk.rfind(closer)
        if start == -1 or end <= start:
            continue
        try:
            value = json.loads(chunk[start : end + 1])
        except json.JSONDecodeError:
            continue
        if isinstance(value, expect):
            return value
    return None


_INDEX_LIST = re.compile(r"[\[(]?\s*\d+(?:\s*[,;\s]\s*\d+)*\s*[\])]?\.?")
_NONE_REPLY = re.compile(r"(?i)(none|no match(es)?|\[\s*\]|0)\.?")


def parse_indices(text: str, count: int, limit: int) -> list[int] | None:
    """Parse a reply such as ``"2,3"`` into 0-based indices.

    Returns ``None`` when the reply is not an index list or names an index
    outside ``1..count``; an explicit ``none`` yields ``[]``.
    """
    lines = [ln.strip().strip("`").strip() for ln in text.strip().splitlines() if ln.strip()]
    for candidate in ([text.strip().strip("`").strip()] + lines[-1:]) if lines else []:
        if _NONE_REPLY.fullmatch(candidate):
            return []
        if _INDEX_LIST.fullmatch(candidate):
            picked: list[int] = []
            for token in re.findall(r"\d+", candidate):
                idx = int(token)
                if not 1 <= idx <= count:
                    return None
                if idx - 1 not in picked:
                    picked.append(idx - 1)
            return picked[:limit]
    return None
